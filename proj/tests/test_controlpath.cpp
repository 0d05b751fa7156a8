/*
 * Copyright 2026 The rfemu Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <random>

#include "rfemu/controlpath.hpp"
#include "rfemu/errors.hpp"
#include "rfemu/golden.hpp"

using namespace rfemu;

namespace {

ComplexSample sample_for(std::int64_t t) {
	// Distinct, exactly representable values per cycle.
	return {quantize_f16(double(t % 2000) + 1.0), quantize_f16(-double(t / 2000) - 1.0)};
}

ComplexSample ideal(std::int64_t t, std::int64_t delay) { return t - delay >= 0 ? sample_for(t - delay) : kZeroSample; }

struct Schedule {
	std::int64_t scenario_length;
	std::vector<std::vector<OutputDelaySpec>> scenarios;
};

// Drives a distributor through every scenario and checks each output against
// an ideal delay line. Returns the number of mismatching samples.
std::int64_t run_schedule(const FifoGeometry& g, const Schedule& s, ControlpathCounters* counters = nullptr) {
	const int outputs = int(s.scenarios.front().size());
	DelayDistributor dd(g, outputs);
	std::int64_t mismatches = 0;
	GddcPlan next;
	for (std::size_t k = 0; k < s.scenarios.size(); ++k) {
		const std::int64_t start = std::int64_t(k) * s.scenario_length;
		const GddcPlan plan = k == 0 ? gddc_parse(s.scenarios[0], g, 0, 0) : next;
		dd.activate(plan);
		if (k + 1 < s.scenarios.size()) {
			next = gddc_parse(s.scenarios[k + 1], g, start + s.scenario_length, start);
			dd.prepare(next);
		}
		std::vector<std::int64_t> delay(std::size_t(outputs), 0);
		for (const auto& o : s.scenarios[k]) delay[std::size_t(o.output_id)] = o.buffer_delay;
		for (std::int64_t t = start; t < start + s.scenario_length; ++t) {
			const auto out = dd.cycle(sample_for(t));
			for (int m = 0; m < outputs; ++m) {
				const auto d = delay[std::size_t(m)];
				const auto want = d < g.bank_depth ? kZeroSample : ideal(t, d);
				if (!(out[std::size_t(m)] == want)) ++mismatches;
			}
		}
	}
	if (counters) *counters = dd.counters();
	return mismatches;
}

}  // namespace

TEST_CASE("buffer delay and minimum delay arithmetic") {
	CHECK(buffer_delay(kSpeedOfLight / 518e6 * 124.0, 518e6, 124) == 0);
	// round(9500 * 518e6 / 2.998e8) = round(16414.28) = 16414.
	CHECK(buffer_delay(9500.0, 518e6, 124) == 16290);
	CHECK(buffer_delay(100.0, 2.998e9, 0) == 1000);
	CHECK_THROWS_WITH_AS(buffer_delay(10.0, 518e6, 124), doctest::Contains("minimum emulable range"), DomainError);
	CHECK(min_emulable_delay(1024, 124) == 1148);
	CHECK(double(min_emulable_delay(1024, 124)) * kSpeedOfLight / 518e6 == doctest::Approx(664.4216).epsilon(1e-6));
	CHECK(double(min_emulable_delay(1024, 124)) * kSpeedOfLight / 215e6 == doctest::Approx(1600.7926).epsilon(1e-6));
	CHECK(double(min_emulable_delay(512, 124)) * kSpeedOfLight / 215e6 == doctest::Approx(886.8502).epsilon(1e-6));
}

TEST_CASE("geometry validation") {
	CHECK_NOTHROW((FifoGeometry{16, 1024, 256}.validate()));
	CHECK_THROWS_AS((FifoGeometry{0, 1024, 256}.validate()), ConfigError);
	CHECK_THROWS_AS((FifoGeometry{16, 0, 256}.validate()), ConfigError);
	CHECK_THROWS_AS((FifoGeometry{16, 1024, 0}.validate()), ConfigError);
}

TEST_CASE("GDDC grouping") {
	const FifoGeometry asic{16, 1024, 256};
	SUBCASE("far apart outputs are not grouped") {
		const OutputDelaySpec o[] = {{0, 3000}, {1, 8000}};
		const auto p = gddc_parse(o, asic, 0, 0);
		CHECK(p.groups.empty());
		CHECK(p.lddcs.size() == 2);
	}
	SUBCASE("inside the protection range") {
		const OutputDelaySpec o[] = {{0, 5000}, {1, 5200}};
		const auto p = gddc_parse(o, asic, 0, 0);
		REQUIRE(p.groups.size() == 1);
		CHECK(p.groups[0].header_id == 0);
		CHECK(p.groups[0].members.size() == 2);
		CHECK(p.groups[0].members[1].offset == 200);
		CHECK(p.lddcs.size() == 1);
	}
	SUBCASE("beyond the protection range") {
		const OutputDelaySpec o[] = {{0, 5000}, {1, 5400}};
		CHECK_THROWS_WITH_AS(gddc_parse(o, asic, 0, 0), doctest::Contains("collision beyond protection range"),
		                     ConfigError);
	}
	SUBCASE("maximum range") {
		const OutputDelaySpec ok[] = {{0, 16384}};
		CHECK_NOTHROW(gddc_parse(ok, asic, 0, 0));
		CHECK(gddc_parse(ok, asic, 0, 0).lddcs[0].wrap_band);
		const OutputDelaySpec bad[] = {{0, 16385}};
		CHECK_THROWS_WITH_AS(gddc_parse(bad, asic, 0, 0), doctest::Contains("exceeds maximum emulation range"),
		                     ConfigError);
	}
	SUBCASE("below one bank is blanked") {
		const OutputDelaySpec o[] = {{0, 1023}, {1, 1024}};
		const auto p = gddc_parse(o, asic, 0, 0);
		CHECK(p.blanked == std::vector<int>{0});
		CHECK(p.lddcs.size() == 1);
	}
	SUBCASE("greedy from the nearest output, roughly 400-sample spacing") {
		const FifoGeometry g{24, 1024, 1024};
		std::vector<OutputDelaySpec> o;
		for (int k = 0; k < 15; ++k) o.push_back({14 - k, 9000 + 417 * k});
		const auto p = gddc_parse(o, g, 0, 0);
		// Headers at 9000, 10251, 11502, 12753, 14004: three members each.
		REQUIRE(p.groups.size() == 5);
		for (const auto& grp : p.groups) CHECK(grp.members.size() == 3);
		CHECK(p.groups[0].header_delay == 9000);
		CHECK(p.groups[1].header_delay == 9000 + 3 * 417);
		CHECK(p.lddcs.size() == 5);
	}
}

TEST_CASE("single output is an exact delay line with bank handoffs") {
	const FifoGeometry g{4, 64, 32};
	for (std::int64_t d : {64, 65, 100, 127, 128, 200, 255, 256}) {
		const Schedule s{1000, {{{0, d}}}};
		ControlpathCounters c;
		CHECK(run_schedule(g, s, &c) == 0);
		CHECK(c.port_conflicts == 0);
		CHECK(c.handoffs > 0);
	}
}

TEST_CASE("read pointer trails the write pointer by the buffer delay") {
	const FifoGeometry g{8, 32, 16};
	const OutputDelaySpec o[] = {{0, 40}, {1, 100}, {2, 255}};
	DelayDistributor dd(g, 3);
	dd.activate(gddc_parse(o, g, 0, 0));
	for (std::int64_t t = 0; t < 2000; ++t) {
		for (const auto& spec : o) {
			const auto r = dd.read_address(spec.output_id);
			REQUIRE(r.has_value());
			const auto diff = ((dd.fifo().write_address() - *r) % g.total_depth() + g.total_depth()) % g.total_depth();
			REQUIRE(diff == spec.buffer_delay % g.total_depth());
		}
		dd.cycle(sample_for(t));
	}
	CHECK(dd.counters().port_conflicts == 0);
}

TEST_CASE("grouped outputs with offsets (0, 10)") {
	const FifoGeometry g{8, 64, 32};
	const Schedule s{512, {{{0, 300}, {1, 310}}, {{0, 300}, {1, 310}}}};
	ControlpathCounters c;
	CHECK(run_schedule(g, s, &c) == 0);
	CHECK(c.collision_groups == 2);
	CHECK(c.multicasts > 0);
	CHECK(c.pb_underflows == 0);
}

TEST_CASE("prefetch across a boundary: resident and streaming") {
	const FifoGeometry g{16, 64, 64};
	SUBCASE("group path delay longer than the scenario: already resident") {
		const Schedule s{256, {{{0, 400}, {1, 600}}, {{0, 400}, {1, 450}}, {{0, 300}, {1, 350}}}};
		ControlpathCounters c;
		CHECK(run_schedule(g, s, &c) == 0);
		CHECK(c.prefetch_resident == 50);
		CHECK(c.prefetch_streaming == 0);
		CHECK(c.pb_underflows == 0);
	}
	SUBCASE("group path delay shorter than the scenario: forked while streaming") {
		const Schedule s{512, {{{0, 100}, {1, 300}}, {{0, 100}, {1, 150}}}};
		ControlpathCounters c;
		CHECK(run_schedule(g, s, &c) == 0);
		CHECK(c.prefetch_streaming == 50);
		CHECK(c.pb_underflows == 0);
	}
}

TEST_CASE("wrap-band delays run without port conflicts") {
	const FifoGeometry g{4, 64, 32};
	const Schedule s{600, {{{0, 256}, {1, 190}, {2, 100}}}};
	ControlpathCounters c;
	CHECK(run_schedule(g, s, &c) == 0);
	CHECK(c.port_conflicts == 0);
	CHECK(c.wrap_band_reads > 0);
}

TEST_CASE("activation contract") {
	const FifoGeometry g{4, 64, 32};
	const OutputDelaySpec o[] = {{0, 100}};
	DelayDistributor dd(g, 1);
	CHECK_THROWS_AS(dd.activate(gddc_parse(o, g, 5, 0)), ContractViolation);
}

TEST_CASE("collision equivalence over randomized delay sets") {
	const FifoGeometry g{8, 64, 48};
	std::mt19937_64 rng(20240);
	int sets = 0, with_groups = 0;
	std::int64_t mismatches = 0, conflicts = 0, resident = 0, streaming = 0;
	while (sets < 200) {
		const int outputs = 2 + int(rng() % 5);
		// Shorter than the FIFO, so both prefetch sources occur.
		Schedule s{384, {}};
		for (int k = 0; k < 3; ++k) {
			std::vector<OutputDelaySpec> o;
			std::uniform_int_distribution<std::int64_t> any(0, g.total_depth());
			std::uniform_int_distribution<std::int64_t> near(1, g.rtr_depth - 1);
			for (int m = 0; m < outputs; ++m) {
				// Every other output is placed right behind the previous one.
				const bool cluster = m > 0 && (rng() & 1);
				std::int64_t d = cluster ? std::min(o.back().buffer_delay + near(rng), g.total_depth()) : any(rng);
				o.push_back({m, d});
			}
			s.scenarios.push_back(o);
		}
		bool valid = true;
		for (const auto& sc : s.scenarios) {
			try {
				gddc_parse(sc, g, 0, 0);
			} catch (const ConfigError&) {
				valid = false;
			}
		}
		if (!valid) continue;
		++sets;
		ControlpathCounters c;
		mismatches += run_schedule(g, s, &c);
		resident += c.prefetch_resident;
		streaming += c.prefetch_streaming;
		conflicts += c.port_conflicts;
		if (c.collision_groups > 0) ++with_groups;
		CHECK(c.pb_underflows == 0);
	}
	CHECK(mismatches == 0);
	CHECK(conflicts == 0);
	CHECK(with_groups > 100);
	CHECK(resident > 0);
	CHECK(streaming > 0);
}

TEST_CASE("resident prefetch starved of idle banks is flagged") {
	// Scenarios of half the FIFO depth: live readers keep the banks holding
	// the group's history busy for most of the look-ahead window.
	const FifoGeometry g{8, 64, 48};
	const Schedule s{256,
	                 {{{0, 486}, {1, 130}, {2, 144}, {3, 149}, {4, 169}},
	                  {{0, 104}, {1, 315}, {2, 355}, {3, 387}, {4, 243}},
	                  {{0, 100}, {1, 445}, {2, 488}, {3, 99}, {4, 237}}}};
	ControlpathCounters c;
	const auto bad = run_schedule(g, s, &c);
	CHECK(c.pb_underflows > 0);
	CHECK(bad > 0);
	CHECK(c.port_conflicts == 0);
}
