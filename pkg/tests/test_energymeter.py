import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from energymeter import (
    JOULES_PER_KWH,
    ConstantPowerProvider,
    CounterFileProvider,
    CounterRead,
    EnergyReading,
    PowerSample,
    Provider,
    TraceReplayProvider,
    constant_power_energy,
    counter_delta,
    integrate_trace,
    load_trace,
    parse_power_source,
    save_trace,
)
from errors import CounterOutOfRange, EmptyTrace, MalformedInputFile, NegativePower, UnsortedTrace, ZeroRange


def ticking_clock(*values):
    return iter(values).__next__


class TestIntegrateTrace:
    def test_rectangle(self):
        reading = integrate_trace([PowerSample(0, 10.0), PowerSample(3_600_000, 10.0)])
        assert reading.joules == 36_000.0
        assert reading.kwh == 0.01
        assert reading.provider is Provider.TRACE_REPLAY
        assert reading.window_ms == 3_600_000

    def test_ramp(self):
        assert integrate_trace([PowerSample(0, 0.0), PowerSample(2000, 10.0)]).joules == 10.0

    def test_single_sample(self):
        reading = integrate_trace([PowerSample(0, 50.0)])
        assert reading.joules == 0.0
        assert reading.window_ms == 0

    def test_empty(self):
        with pytest.raises(EmptyTrace):
            integrate_trace([])

    def test_unsorted(self):
        with pytest.raises(UnsortedTrace):
            integrate_trace([PowerSample(0, 1.0), PowerSample(1000, 1.0), PowerSample(500, 1.0)])

    def test_repeated_timestamp_is_allowed(self):
        reading = integrate_trace([PowerSample(0, 4.0), PowerSample(1000, 4.0), PowerSample(1000, 8.0), PowerSample(2000, 8.0)])
        assert reading.joules == 12.0

    @pytest.mark.parametrize("watts", [-1.0, float("nan"), float("inf")])
    def test_invalid_power_rejected(self, watts):
        with pytest.raises(NegativePower):
            PowerSample(0, watts)


trace_strategy = st.lists(
    st.tuples(st.integers(min_value=0, max_value=5000), st.integers(min_value=0, max_value=500)),
    min_size=2,
    max_size=40,
).map(lambda steps: _build_trace(steps))


def _build_trace(steps):
    t, samples = 0, []
    for gap, watts in steps:
        t += gap
        samples.append(PowerSample(t, float(watts)))
    return samples


class TestIntegrationProperties:
    @settings(max_examples=200, deadline=None)
    @given(samples=trace_strategy, data=st.data())
    def test_additive_over_partitions(self, samples, data):
        cut = data.draw(st.integers(min_value=0, max_value=len(samples) - 1))
        whole = integrate_trace(samples).joules
        left = integrate_trace(samples[: cut + 1]).joules
        right = integrate_trace(samples[cut:]).joules
        assert left + right == pytest.approx(whole, rel=1e-12, abs=1e-9)

    @settings(max_examples=200, deadline=None)
    @given(samples=trace_strategy)
    def test_non_negative_and_unit_exact(self, samples):
        reading = integrate_trace(samples)
        assert reading.joules >= 0
        assert reading.kwh >= 0
        assert abs(reading.kwh * JOULES_PER_KWH - reading.joules) <= math.ulp(reading.joules)


class TestCounterDelta:
    def test_plain_difference(self):
        assert counter_delta(CounterRead(1_000_000, 10**9), CounterRead(4_600_000, 10**9)) == 3.6

    def test_identity(self):
        assert counter_delta(CounterRead(123_456, 10**9), CounterRead(123_456, 10**9)) == 0.0

    def test_wraparound(self):
        max_range = 10**9
        delta = counter_delta(CounterRead(max_range - 100, max_range), CounterRead(400, max_range))
        assert delta == pytest.approx(501e-6, rel=1e-12)

    def test_zero_range(self):
        with pytest.raises(ZeroRange):
            counter_delta(CounterRead(0, 0), CounterRead(0, 0))

    @pytest.mark.parametrize("value", [-1, 1001])
    def test_read_outside_range(self, value):
        with pytest.raises(CounterOutOfRange):
            CounterRead(value, 1000)

    def test_reads_with_different_ranges(self):
        with pytest.raises(CounterOutOfRange):
            counter_delta(CounterRead(0, 1000), CounterRead(0, 2000))

    @settings(max_examples=300)
    @given(
        max_range=st.integers(min_value=1, max_value=2**40),
        data=st.data(),
    )
    def test_single_wrap_is_non_negative(self, max_range, data):
        before = data.draw(st.integers(min_value=0, max_value=max_range))
        after = data.draw(st.integers(min_value=0, max_value=max_range))
        assert counter_delta(CounterRead(before, max_range), CounterRead(after, max_range)) >= 0


class TestConstantPower:
    def test_definition(self):
        reading = constant_power_energy(28.0, 1000)
        assert reading.joules == 28.0
        assert reading.provider is Provider.CONSTANT_POWER

    def test_zero_watts(self):
        assert constant_power_energy(0.0, 987_654).joules == 0.0

    def test_unit_anchor(self):
        assert constant_power_energy(10.0, 3_600_000).kwh == 0.01

    @pytest.mark.parametrize("watts", [-1.0, float("nan"), float("inf")])
    def test_invalid_watts(self, watts):
        with pytest.raises(NegativePower):
            constant_power_energy(watts, 1000)

    def test_reading_kwh_is_derived(self):
        reading = EnergyReading.from_joules(7200, Provider.COUNTER_FILE, 10)
        assert reading.kwh == 7200 / 3.6e6


class TestTraceFiles:
    def test_load_fixture(self, fixtures_dir):
        samples = load_trace(fixtures_dir / "trace_ramp.csv")
        assert samples == [PowerSample(0, 0.0), PowerSample(2000, 10.0)]
        assert integrate_trace(samples).joules == 10.0

    def test_unsorted_fixture(self, fixtures_dir):
        with pytest.raises(UnsortedTrace):
            integrate_trace(load_trace(fixtures_dir / "trace_unsorted.csv"))

    def test_round_trip(self, tmp_path):
        samples = [PowerSample(1_700_000_000_000, 12.5), PowerSample(1_700_000_000_100, 13.25)]
        save_trace(samples, tmp_path / "trace.csv")
        assert load_trace(tmp_path / "trace.csv") == samples

    def test_missing_column(self, tmp_path):
        path = tmp_path / "trace.csv"
        path.write_text("time,power\n0,1\n", encoding="utf-8")
        with pytest.raises(MalformedInputFile):
            load_trace(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "trace.csv"
        path.write_text("", encoding="utf-8")
        with pytest.raises(EmptyTrace):
            load_trace(path)

    def test_empty_watts_cell(self, tmp_path):
        path = tmp_path / "trace.csv"
        path.write_text("timestamp_ms,watts\n0,10\n1000,\n2000,10\n", encoding="utf-8")
        with pytest.raises(MalformedInputFile, match="row 2"):
            load_trace(path)

    @pytest.mark.parametrize(
        "content",
        ["timestamp_ms,watts\n0,ten\n", "timestamp_ms,watts\n0,10\n\"1000,10\n", "timestamp_ms,watts\n0,10\n1000,10,3\n"],
    )
    def test_unreadable_rows(self, tmp_path, content):
        path = tmp_path / "trace.csv"
        path.write_text(content, encoding="utf-8")
        with pytest.raises(MalformedInputFile):
            load_trace(path)


class TestProviders:
    def test_constant_power_uses_clock(self):
        provider = ConstantPowerProvider(28.0, clock=ticking_clock(1_000, 6_000))
        provider.start()
        reading = provider.stop()
        assert reading.joules == 140.0
        assert provider.window() == (1_000, 6_000)
        assert provider.describe() == "constant-power:28.0W"

    @pytest.mark.parametrize("watts", [-5, float("nan")])
    def test_constant_power_rejects_invalid_watts(self, watts):
        with pytest.raises(NegativePower):
            ConstantPowerProvider(watts)

    def test_trace_replay_window_comes_from_trace(self, fixtures_dir):
        provider = TraceReplayProvider(fixtures_dir / "trace_bench.csv")
        provider.start()
        reading = provider.stop()
        assert provider.window() == (1_700_000_000_000, 1_700_000_002_000)
        assert reading.window_ms == 2000
        assert reading.joules == pytest.approx(57.625, rel=1e-12)

    def test_counter_file_sums_deltas(self, tmp_path):
        counter = tmp_path / "energy_uj"
        counter.write_text("1000000\n", encoding="ascii")
        provider = CounterFileProvider(counter, max_range_uj=10**9, interval_ms=60_000, clock=ticking_clock(0, 2000))
        provider.start()
        counter.write_text("4600000\n", encoding="ascii")
        reading = provider.stop()
        assert reading.joules == 3.6
        assert reading.provider is Provider.COUNTER_FILE
        assert reading.window_ms == 2000
        assert provider.samples == [PowerSample(2000, 1.8)]

    def test_counter_file_wraps(self, tmp_path):
        counter = tmp_path / "energy_uj"
        counter.write_text(str(10**9 - 100), encoding="ascii")
        provider = CounterFileProvider(counter, max_range_uj=10**9, interval_ms=60_000, clock=ticking_clock(0, 1000))
        provider.start()
        counter.write_text("400", encoding="ascii")
        assert provider.stop().joules == pytest.approx(501e-6, rel=1e-12)

    def test_counter_file_reads_companion_range(self, tmp_path):
        counter = tmp_path / "energy_uj"
        counter.write_text("0", encoding="ascii")
        (tmp_path / "max_energy_range_uj").write_text("262143328850\n", encoding="ascii")
        provider = CounterFileProvider(counter)
        assert provider.max_range_uj == 262143328850

    def test_counter_file_needs_a_range(self, tmp_path):
        counter = tmp_path / "energy_uj"
        counter.write_text("0", encoding="ascii")
        with pytest.raises(ZeroRange):
            CounterFileProvider(counter)

    def test_counter_above_range_fails_on_start(self, tmp_path):
        counter = tmp_path / "energy_uj"
        counter.write_text("5000", encoding="ascii")
        provider = CounterFileProvider(counter, max_range_uj=1000, interval_ms=60_000)
        with pytest.raises(CounterOutOfRange):
            provider.start()

    def test_counter_file_must_be_numeric(self, tmp_path):
        counter = tmp_path / "energy_uj"
        counter.write_text("n/a", encoding="ascii")
        provider = CounterFileProvider(counter, max_range_uj=10**9, interval_ms=60_000)
        with pytest.raises(MalformedInputFile):
            provider.start()


class TestParsePowerSource:
    def test_constant(self):
        provider = parse_power_source("constant:28")
        assert isinstance(provider, ConstantPowerProvider)
        assert provider.watts == 28.0

    def test_trace(self, fixtures_dir):
        assert isinstance(parse_power_source(f"trace:{fixtures_dir / 'trace_ramp.csv'}"), TraceReplayProvider)

    def test_counter(self, tmp_path):
        counter = tmp_path / "energy_uj"
        counter.write_text("0", encoding="ascii")
        provider = parse_power_source(f"counter:{counter}", max_range_uj=1000)
        assert isinstance(provider, CounterFileProvider)

    @pytest.mark.parametrize("source", ["constant", "constant:lots", "constant:nan", "constant:-5", "battery:5", "28"])
    def test_rejects_bad_sources(self, source):
        with pytest.raises(ValueError):
            parse_power_source(source)
