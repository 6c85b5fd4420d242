"""Shared builders for the test suite."""

from __future__ import annotations

from datetime import datetime, timedelta, timezone

import pytest

from defectlab import DefectRecord, Phase, ProductProfile, Status

EPOCH = datetime(2004, 3, 1, tzinfo=timezone.utc)


def make_record(
    rid: str = "d1",
    product_id: str = "m1",
    phase_injected: Phase = Phase.BUILD,
    phase_found: Phase = Phase.REVIEW,
    found_offset_h: float = 0.0,
    fixed_offset_h: float | None = None,
    severity: int = 2,
    fix_changes: int | None = None,
) -> DefectRecord:
    """One defect record with offsets in hours from a fixed epoch."""
    fixed = None if fixed_offset_h is None else EPOCH + timedelta(hours=fixed_offset_h)
    return DefectRecord(
        id=rid,
        product_id=product_id,
        phase_injected=phase_injected,
        phase_found=phase_found,
        found_at=EPOCH + timedelta(hours=found_offset_h),
        fixed_at=fixed,
        severity=severity,
        status=Status.FIXED if fixed is not None else Status.OPEN,
        fix_changes=fix_changes,
    )


@pytest.fixture
def audited_profile() -> ProductProfile:
    return ProductProfile(
        product_id="m1", unique_formulas=2182, description="average audited model"
    )
