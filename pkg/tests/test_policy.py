from __future__ import annotations

import random

import pytest
from hypothesis import given, settings, strategies as st

from weavekit import CapacityError, HardwareProfile, admit_batches, policy_for_tool, select_tier
from weavekit.policy import PRECISION_ORDER, probe_hardware
from weavekit.registry import ToolSpec

from oracles import brute_force_min_batches


def tool(int4=2000, int8=4000, fp16=8000, tool_id="model.x"):
    return ToolSpec(
        id=tool_id,
        inputs=(("text", "plain"),),
        output=("symbolic", "abc"),
        cost_estimate=500,
        mem_estimate_mb={"int4": int4, "int8": int8, "fp16": fp16},
        kind="compose",
    )


class TestProbe:
    def test_injection_passthrough(self):
        injected = HardwareProfile(0, 8192, 100000)
        assert probe_hardware(injected) is injected

    def test_a40_profile_verbatim(self, profile_a40):
        assert probe_hardware(profile_a40).accel_mem_mb == 46068

    def test_real_probe_nonnegative(self):
        profile = probe_hardware()
        assert profile.accel_mem_mb >= 0
        assert profile.host_mem_mb >= 1
        assert profile.disk_free_mb >= 0

    def test_probe_stable_within_process(self):
        assert probe_hardware() == probe_hardware()


class TestSelectTier:
    @pytest.mark.parametrize(
        "accel,expected",
        [(0, "low"), (4096, "low"), (8191, "low"), (8192, "medium"),
         (24575, "medium"), (24576, "high"), (46068, "high")],
    )
    def test_thresholds(self, accel, expected):
        profile = HardwareProfile(accel, 65536, 0)
        assert select_tier(profile) == expected

    def test_override_dominates(self, profile_a40):
        assert select_tier(profile_a40, override="low") == "low"


class TestPolicyForTool:
    def test_low_tier_small_tool_on_accelerator(self, profile_low):
        # fp16 estimate fits 4096, so even the low tier uses the accelerator
        policy = policy_for_tool("low", tool(int4=2000, int8=3000, fp16=4000), profile_low)
        assert policy.precision == "int4"
        assert policy.placement == "accelerator"
        assert policy.lazy_load and policy.offload_cache
        assert policy.max_parallel == 1

    def test_low_tier_pages_when_fp16_exceeds_accel(self, profile_low):
        policy = policy_for_tool("low", tool(int4=2000, int8=4000, fp16=9000), profile_low)
        assert policy.precision == "int4"
        assert policy.placement == "paged"

    def test_medium_tier_int8(self):
        profile = HardwareProfile(16384, 32768, 0)
        policy = policy_for_tool("medium", tool(int4=3000, int8=6000, fp16=12000), profile)
        assert policy.precision == "int8"
        assert policy.placement == "accelerator"
        assert policy.max_parallel == 2

    def test_high_tier_fp16_fallback_to_int8(self, profile_a40):
        # fp16 60000 > 46068 rejected; int8 30000 <= 46068 accepted
        policy = policy_for_tool("high", tool(int4=15000, int8=30000, fp16=60000), profile_a40)
        assert policy.precision == "int8"
        assert policy.placement == "accelerator"
        assert not policy.lazy_load and not policy.offload_cache
        assert policy.max_parallel == 4

    def test_high_tier_fp16_when_it_fits(self, profile_a40):
        policy = policy_for_tool("high", tool(fp16=9000), profile_a40)
        assert policy.precision == "fp16"
        assert policy.placement == "accelerator"

    def test_capacity_error_when_nothing_fits(self):
        tiny = HardwareProfile(2048, 2048, 0)
        with pytest.raises(CapacityError):
            policy_for_tool("low", tool(int4=9999999, int8=9999999, fp16=9999999), tiny)

    def test_cpu_only_uses_host_placement(self):
        cpu = HardwareProfile(0, 16384, 0)
        policy = policy_for_tool("medium", tool(int4=1000, int8=2000, fp16=4000), cpu)
        assert policy.placement == "host"

    def test_fit_invariant(self, profile_a40, profile_low):
        for tier in ("low", "medium", "high"):
            for profile in (profile_a40, profile_low):
                try:
                    policy = policy_for_tool(tier, tool(), profile)
                except CapacityError:
                    continue
                if policy.placement == "accelerator":
                    assert tool().mem_estimate_mb[policy.precision] <= profile.accel_mem_mb

    def test_deterministic(self, profile_a40):
        assert policy_for_tool("high", tool(), profile_a40) == policy_for_tool(
            "high", tool(), profile_a40
        )

    def test_tier_monotonicity_1000_samples(self):
        rng = random.Random(20260809)
        order = {"low": 0, "medium": 1, "high": 2}
        checked = 0
        while checked < 1000:
            int4 = rng.randint(1, 30000)
            int8 = rng.randint(int4, 60000)
            fp16 = rng.randint(int8, 90000)
            profile = HardwareProfile(rng.randint(0, 80000), rng.randint(1024, 131072), 0)
            spec = tool(int4=int4, int8=int8, fp16=fp16)
            policies = {}
            try:
                for tier in order:
                    policies[tier] = policy_for_tool(tier, spec, profile)
            except CapacityError:
                continue
            checked += 1
            assert (
                PRECISION_ORDER[policies["low"].precision]
                <= PRECISION_ORDER[policies["medium"].precision]
                <= PRECISION_ORDER[policies["high"].precision]
            )
        assert checked == 1000


class TestAdmitBatches:
    def test_ffd_example(self):
        batches = admit_batches([("a", 10), ("b", 7), ("c", 5), ("d", 3)], 12)
        assert batches == [["a"], ["b", "c"], ["d"]]

    def test_empty(self):
        assert admit_batches([], 12) == []

    def test_oversized_job_named(self):
        with pytest.raises(CapacityError, match="job a"):
            admit_batches([("a", 13)], 12)

    def test_tie_break_by_id(self):
        batches = admit_batches([("b", 5), ("a", 5)], 5)
        assert batches == [["a"], ["b"]]

    @given(
        st.lists(st.integers(min_value=1, max_value=20), min_size=0, max_size=8),
        st.integers(min_value=20, max_value=40),
    )
    @settings(max_examples=120, deadline=None)
    def test_packing_validity_property(self, mems, budget):
        jobs = [(f"j{i:02d}", m) for i, m in enumerate(mems)]
        batches = admit_batches(jobs, budget)
        sizes = dict(jobs)
        packed = [job for batch in batches for job in batch]
        assert sorted(packed) == sorted(sizes)  # partition: no dupes, no loss
        for batch in batches:
            assert sum(sizes[j] for j in batch) <= budget
        optimum = brute_force_min_batches(mems, budget)
        assert len(batches) <= 2 * optimum or optimum == 0

    def test_deterministic(self):
        jobs = [("a", 10), ("b", 7), ("c", 5), ("d", 3)]
        assert admit_batches(jobs, 12) == admit_batches(list(jobs), 12)
