"""Hardware probing, tier selection, per-tool inference policies, batching.

The tier table is deliberately small: accelerator memory below 8 GB is low,
below 24 GB is medium, anything bigger is high. Each tier maps to a default
precision/placement/loading policy; high tier prefers fp16 and falls back to
int8 when the card cannot hold the fp16 weights. Thresholds and cost factors
are configurable (see config.Config).
"""

from __future__ import annotations

import os
import shutil
import subprocess
from dataclasses import dataclass, asdict

from .config import Config
from .errors import CapacityError, ValidationError
from .registry import ToolSpec

TIER_ORDER = {"low": 0, "medium": 1, "high": 2}
PRECISION_ORDER = {"int4": 0, "int8": 1, "fp16": 2}


@dataclass(frozen=True)
class HardwareProfile:
    accel_mem_mb: int  # 0 = no accelerator
    host_mem_mb: int
    disk_free_mb: int


@dataclass(frozen=True)
class ToolPolicy:
    precision: str  # int4 | int8 | fp16
    placement: str  # accelerator | host | paged
    lazy_load: bool
    offload_cache: bool
    max_parallel: int
    batch_budget_mb: int

    def fields(self) -> dict:
        return asdict(self)


_probe_cache: HardwareProfile | None = None


def _probe_accel_mb() -> int:
    try:
        out = subprocess.run(
            ["nvidia-smi", "--query-gpu=memory.total", "--format=csv,noheader,nounits"],
            capture_output=True,
            text=True,
            timeout=5,
        )
        if out.returncode == 0 and out.stdout.strip():
            return int(float(out.stdout.strip().splitlines()[0]))
    except (OSError, ValueError, subprocess.TimeoutExpired):
        pass
    return 0


def _probe_host_mb() -> int:
    try:
        pages = os.sysconf("SC_PHYS_PAGES")
        page_size = os.sysconf("SC_PAGE_SIZE")
        return max(1, (pages * page_size) // (1024 * 1024))
    except (ValueError, OSError, AttributeError):
        return 1


def _probe_disk_mb() -> int:
    try:
        return shutil.disk_usage(os.getcwd()).free // (1024 * 1024)
    except OSError:
        return 0


def probe_hardware(injected: HardwareProfile | None = None) -> HardwareProfile:
    """Best-effort hardware readings, cached for the lifetime of the process.

    Tests inject a profile instead of probing; absence of a probe source
    reads as zero, never a fabricated value.
    """
    global _probe_cache
    if injected is not None:
        return injected
    if _probe_cache is None:
        _probe_cache = HardwareProfile(
            accel_mem_mb=_probe_accel_mb(),
            host_mem_mb=_probe_host_mb(),
            disk_free_mb=_probe_disk_mb(),
        )
    return _probe_cache


def select_tier(profile: HardwareProfile, override: str | None = None, config: Config | None = None) -> str:
    if override is not None:
        if override not in TIER_ORDER:
            raise ValidationError(f"unknown tier {override!r}")
        return override
    cfg = config or Config()
    if profile.accel_mem_mb < cfg.tier_medium_mb:
        return "low"
    if profile.accel_mem_mb < cfg.tier_high_mb:
        return "medium"
    return "high"


def _fits_accel(est_mb: int, profile: HardwareProfile) -> bool:
    return profile.accel_mem_mb > 0 and est_mb <= profile.accel_mem_mb


def policy_for_tool(tier: str, spec: ToolSpec, profile: HardwareProfile) -> ToolPolicy:
    """Default tier -> policy mapping.

    low    : int4, accelerator only when even the fp16 estimate fits, else
             paged (host when no accelerator exists); lazy + offload, serial.
    medium : int8, accelerator when the int8 estimate fits, else paged;
             lazy + offload, 2-way parallel.
    high   : fp16 on the accelerator when it fits, else int8; eager load,
             4-way parallel. Never drops below int8 so precision stays
             monotone in the tier order.
    """
    if tier not in TIER_ORDER:
        raise ValidationError(f"unknown tier {tier!r}")
    est = spec.mem_estimate_mb
    accel = profile.accel_mem_mb
    host = profile.host_mem_mb

    def fail() -> CapacityError:
        return CapacityError(
            f"tool {spec.id} does not fit this profile at any usable precision "
            f"(accel {accel} MB, host {host} MB)"
        )

    if tier == "low":
        precision = "int4"
        if _fits_accel(est["fp16"], profile):
            placement = "accelerator"
        elif est["int4"] <= host:
            placement = "host" if accel == 0 else "paged"
        else:
            raise fail()
        lazy, offload, parallel = True, True, 1
    elif tier == "medium":
        precision = "int8"
        if _fits_accel(est["int8"], profile):
            placement = "accelerator"
        elif est["int8"] <= host:
            placement = "host" if accel == 0 else "paged"
        else:
            raise fail()
        lazy, offload, parallel = True, True, 2
    else:  # high: fp16 first, int8 fallback
        if _fits_accel(est["fp16"], profile):
            precision, placement = "fp16", "accelerator"
        elif _fits_accel(est["int8"], profile):
            precision, placement = "int8", "accelerator"
        elif est["fp16"] <= host and accel == 0:
            precision, placement = "fp16", "host"
        elif est["int8"] <= host:
            precision, placement = "int8", "host" if accel == 0 else "paged"
        else:
            raise fail()
        lazy, offload, parallel = False, False, 4

    budget = accel if placement == "accelerator" else host
    return ToolPolicy(
        precision=precision,
        placement=placement,
        lazy_load=lazy,
        offload_cache=offload,
        max_parallel=parallel,
        batch_budget_mb=max(1, budget),
    )


def admit_batches(jobs: list[tuple[str, int]], budget_mb: int) -> list[list[str]]:
    """First-fit-decreasing packing of (job_id, mem_mb) jobs under budget_mb.

    Jobs are placed largest first (ties by id) into the first batch with
    room; a job bigger than the whole budget is a capacity error.
    """
    if budget_mb <= 0:
        raise ValidationError("budget_mb must be positive")
    for job_id, mem in jobs:
        if mem > budget_mb:
            raise CapacityError(f"job {job_id} needs {mem} MB, budget is {budget_mb} MB")
    ordered = sorted(jobs, key=lambda j: (-j[1], j[0]))
    batches: list[list[str]] = []
    sums: list[int] = []
    for job_id, mem in ordered:
        for i, total in enumerate(sums):
            if total + mem <= budget_mb:
                batches[i].append(job_id)
                sums[i] += mem
                break
        else:
            batches.append([job_id])
            sums.append(mem)
    return batches
