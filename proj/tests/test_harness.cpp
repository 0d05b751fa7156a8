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

#include <cmath>
#include <random>

#include "rfemu/errors.hpp"
#include "rfemu/harness.hpp"

using namespace rfemu;
using cd = std::complex<double>;

namespace {

SceneObject object(std::string id, bool tx, bool refl, bool rx, Vec3 pos) {
	SceneObject o;
	o.id = std::move(id);
	o.transmits = tx;
	o.reflects = refl;
	o.receives = rx;
	o.position = pos;
	if (tx) {
		o.waveform = default_waveform();
		o.waveform->pri_cycles = 16384;
		o.waveform->burst_cycles = 2048;
	}
	return o;
}

Scene two_node(double distance) {
	Scene s;
	s.scenario_length = 16384;
	s.path_loss.reference_distance = distance;
	s.objects = {object("tx", true, false, false, {0, 0, 0}), object("rx", false, false, true, {distance, 0, 0})};
	return s;
}

std::vector<ScenarioConfigPacket> packets(const std::vector<FrameSolution>& f) {
	std::vector<ScenarioConfigPacket> out;
	for (const auto& x : f) out.push_back(x.scp);
	return out;
}

Stream chirp_reference() { return to_stream(linear_chirp()); }

}  // namespace

TEST_CASE("matched filter") {
	const Stream ref = chirp_reference();
	Stream cap(4000);
	for (std::size_t k = 0; k < ref.size(); ++k) cap[1234 + k] = ref[k];
	auto corr = matched_filter(cap, ref);
	CHECK(corr.size() == cap.size());
	CHECK(std::max_element(corr.begin(), corr.end()) - corr.begin() == 1234);

	const Stream zero(1000);
	for (double v : matched_filter(zero, ref)) CHECK(v == 0.0);

	Stream two(6000);
	for (std::size_t k = 0; k < ref.size(); ++k) {
		two[1000 + k] += 0.8 * ref[k];
		two[3000 + k] += 0.2 * ref[k];
	}
	corr = matched_filter(two, ref);
	const auto peaks = detect_peaks(corr, {0.1, 16});
	REQUIRE(peaks.size() == 2);
	CHECK(peaks[0].index == 1000);
	CHECK(peaks[1].index == 3000);
	CHECK(peaks[1].amplitude / peaks[0].amplitude == doctest::Approx(0.25).epsilon(0.01));
}

TEST_CASE("peak detection rules") {
	CHECK(detect_peaks(std::vector<double>{}).empty());
	std::vector<double> imp(50, 0.0);
	imp[20] = 3.0;
	auto p = detect_peaks(imp);
	REQUIRE(p.size() == 1);
	CHECK(p[0].index == 20);
	CHECK(p[0].lag == 20.0);

	std::vector<double> plateau(50, 0.0);
	for (int i = 10; i < 14; ++i) plateau[std::size_t(i)] = 1.0;
	p = detect_peaks(plateau);
	REQUIRE(p.size() == 1);
	CHECK(p[0].index == 10);

	// Equal peaks closer than min_separation: the smaller lag survives.
	std::vector<double> close(60, 0.0);
	close[20] = 1.0;
	close[25] = 1.0;
	close[50] = 0.5;
	p = detect_peaks(close, {0.3, 16});
	REQUIRE(p.size() == 2);
	CHECK(p[0].index == 20);
	CHECK(p[1].index == 50);
	p = detect_peaks(close, {0.6, 4});
	CHECK(p.size() == 2);

	// Parabolic refinement towards the larger neighbour.
	std::vector<double> tri = {0.0, 0.5, 1.0, 0.75, 0.0};
	p = detect_peaks(tri);
	REQUIRE(p.size() == 1);
	CHECK(p[0].lag == doctest::Approx(2.0 + 0.5 * (0.5 - 0.75) / (0.5 - 2.0 + 0.75)));

	CHECK_THROWS_AS(detect_peaks(imp, {0.0, 16}), DomainError);
	CHECK_THROWS_AS(detect_peaks(imp, {1.5, 16}), DomainError);
	CHECK(detect_peaks(std::vector<double>(10, 0.0)).empty());
}

TEST_CASE("range metrics") {
	const double mps = kSpeedOfLight / 518e6;
	Peak a{100, 100.0, 1.0}, b{200, 200.0, 1.0};
	const Peak both[] = {a, b};
	const double exact[] = {200.0 * mps, 100.0 * mps};
	auto r = range_metrics(both, exact, mps);
	CHECK(r.mse == 0.0);
	CHECK(r.misses == 0);
	CHECK(r.matches[0].peak->index == 200);

	// Y = 10.0283 km vs 10 km.
	Peak y{0, 10028.3, 1.0};
	const Peak one[] = {y};
	const double ten[] = {10000.0};
	r = range_metrics(one, ten, 1.0);
	CHECK(r.matches[0].error_pct == doctest::Approx(0.283));
	CHECK(r.mse == doctest::Approx(28.3 * 28.3));

	const double e2[] = {99.0, 203.0};
	r = range_metrics(both, e2, 1.0);
	CHECK(r.mse == doctest::Approx((1.0 + 9.0) / 2.0));

	const double three[] = {100.0, 200.0, 5000.0};
	r = range_metrics(both, three, 1.0);
	CHECK(r.misses == 1);
	CHECK(std::isinf(r.matches[2].error_m));
	CHECK(r.mse == 0.0);
}

TEST_CASE("compare to golden") {
	std::vector<ComplexSample> dut = {ComplexSample::quantize({0.5, 0.25}), ComplexSample::quantize({-1.0, 0.0})};
	const Stream same = to_stream(dut);
	auto c = compare_to_golden(dut, same, 0);
	CHECK(c.rms_rel_error == 0.0);
	CHECK(c.max_abs_error == 0.0);
	CHECK(c.samples == 2);
	const Stream off = {cd{0.5, 0.25}, cd{-0.5, 0.0}};
	c = compare_to_golden(dut, off, 1);
	CHECK(c.samples == 1);
	CHECK(c.max_abs_error == doctest::Approx(0.5));
	CHECK(c.rms_rel_error == doctest::Approx(1.0));
	CHECK_THROWS_AS(compare_to_golden(dut, Stream(3), 0), ConfigError);
	CHECK_THROWS_WITH_AS(compare_to_golden(dut, same, 2), doctest::Contains("nothing to compare"), ConfigError);
}

TEST_CASE("direct path: peak at the programmed delay") {
	const auto& p = preset_by_name("asic4");
	for (double d : {2000.0, 6500.0}) {
		const Scene s = two_node(d);
		const auto f = compile_scene(s, p, 1);
		const auto run = run_emulation(s, p, packets(f), 16384);
		const auto corr = matched_filter(to_stream(run.captured[1]), chirp_reference());
		const auto peaks = detect_peaks(corr);
		REQUIRE(peaks.size() == 1);
		const double expect = f[0].exact[0].delay_samples;
		CHECK(std::fabs(peaks[0].lag - expect) < 0.25);
		const double range[] = {d};
		const auto rep = range_metrics(peaks, range, kSpeedOfLight / p.sample_rate_hz);
		CHECK(rep.matches[0].error_pct < 1.0);
		CHECK(run.totals.port_conflicts == 0);
	}
}

TEST_CASE("all gains zero gives a zero capture") {
	const auto& p = preset_by_name("asic4");
	Scene s = two_node(3000.0);
	s.objects[0].antenna.g_t = AngleTable(0.0);
	const auto run = run_emulation(s, p, packets(compile_scene(s, p, 1)), 8192);
	for (const auto& x : run.captured[1]) REQUIRE(x == kZeroSample);
}

TEST_CASE("three-node chain adds delays and agrees with the golden model") {
	const auto& p = preset_by_name("asic4");
	Scene s;
	s.scenario_length = 16384;
	s.path_loss.reference_distance = 2500.0;
	s.inter_object = false;
	s.objects = {object("tx", true, false, false, {0, 0, 0}), object("obj", false, true, false, {2500, 0, 0}),
	             object("rx", false, false, true, {2500, 2000, 0})};
	s.objects[2].antenna.g_r = AngleTable(1.0);
	// Keep only the chain: the receiver must not see the direct path.
	s.objects[0].antenna.g_t = AngleTable({-3.14159265358979, 0.0, 0.5, 3.0}, {0.0}, {0.0, 1.0, 0.0, 0.0});
	const auto f = compile_scene(s, p, 1);
	const auto run = run_emulation(s, p, packets(f), 16384);
	const auto corr = matched_filter(to_stream(run.captured[2]), chirp_reference());
	const auto peaks = detect_peaks(corr);
	double d01 = 0, d12 = 0;
	for (const auto& e : f[0].exact) {
		if (e.src == 0 && e.dst == 1) d01 = e.delay_samples;
		if (e.src == 1 && e.dst == 2) d12 = e.delay_samples;
	}
	REQUIRE(!peaks.empty());
	CHECK(std::fabs(peaks.front().lag - (d01 + d12)) < 0.5);

	const auto g = golden_scene_run(build_golden_scene(s, p, f, 16384), 16384);
	const auto cmp = compare_to_golden(run.captured[2], g.received[2], 0);
	// Two fractional hops through the 4-tap FDC.
	CHECK(cmp.rms_rel_error < 5e-2);
}

TEST_CASE("identical consecutive packets make the boundary a no-op") {
	const auto& p = preset_by_name("asic4");
	Scene s;
	s.scenario_length = 4096;
	s.path_loss.reference_distance = 3000.0;
	// Two receivers close in range so the transmitter's outputs form a group.
	s.objects = {object("tx", true, false, false, {0, 0, 0}), object("r1", false, false, true, {3000, 0, 0}),
	             object("r2", false, false, true, {3040, 0, 0})};
	s.objects[1].velocity = {0, 0, 0};
	const auto f = compile_scene(s, p, 1);
	const std::vector<ScenarioConfigPacket> many(5, f[0].scp);
	Scene single = s;
	single.scenario_length = 4096 * 5;
	const auto a = run_emulation(s, p, many, 4096 * 5);
	const auto b = run_emulation(single, p, std::vector<ScenarioConfigPacket>{f[0].scp}, 4096 * 5);
	CHECK(a.captured == b.captured);
	CHECK(a.totals.collision_groups == 5);
	CHECK(a.totals.pb_underflows == 0);
}

TEST_CASE("RCS change at a boundary") {
	const auto& p = preset_by_name("asic4");
	Scene s;
	s.scenario_length = 8192;
	s.path_loss.reference_distance = 1500.0;
	s.inter_object = false;
	s.objects = {object("tx", true, false, false, {0, 0, 0}), object("obj", false, true, false, {1500, 0, 0}),
	             object("rx", false, false, true, {1500, 1500, 0})};
	s.objects[0].waveform->pri_cycles = 8192;
	s.objects[0].antenna.g_t = AngleTable({-3.14159265358979, 0.0, 0.5, 3.0}, {0.0}, {0.0, 1.0, 0.0, 0.0});
	auto f = compile_scene(s, p, 2);
	const std::size_t link = 2;  // obj -> rx
	REQUIRE(f[1].scp.links[link].src == 1);
	f[1].scp.links[link].beta_rho = quantize_f16(0.5 * f[1].scp.links[link].beta_rho.value());
	const auto run = run_emulation(s, p, packets(f), 16384);
	auto amp = [&](std::int64_t begin) {
		const auto pk = detect_peaks(matched_filter(to_stream(std::vector<ComplexSample>(
		                                                run.captured[2].begin() + begin, run.captured[2].begin() + begin + 8192)),
		                                            chirp_reference()));
		return pk.empty() ? 0.0 : pk.front().amplitude;
	};
	CHECK(amp(8192) / amp(0) == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("determinism across thread counts") {
	const auto& p = preset_by_name("asic4");
	Scene s;
	s.scenario_length = 4096;
	s.path_loss.reference_distance = 3000.0;
	s.inter_object = false;
	s.objects = {object("tx", true, false, false, {0, 0, 0}), object("a", false, true, false, {3000, 0, 0}),
	             object("b", false, true, false, {0, 5000, 0}), object("rx", false, false, true, {2000, -3500, 0})};
	s.objects[1].velocity = {-40, 0, 0};
	const auto f = compile_scene(s, p, 3);
	const auto one = run_emulation(s, p, packets(f), 4096 * 3, {1});
	const auto again = run_emulation(s, p, packets(f), 4096 * 3, {1});
	const auto four = run_emulation(s, p, packets(f), 4096 * 3, {4});
	CHECK(one.captured == again.captured);
	CHECK(one.captured == four.captured);
	CHECK(instrumentation_json(one) == instrumentation_json(four));
}

TEST_CASE("run errors") {
	const auto& p = preset_by_name("asic4");
	const Scene s = two_node(3000.0);
	auto scps = packets(compile_scene(s, p, 1));
	CHECK_THROWS_WITH_AS(run_emulation(s, p, scps, 16384 * 2), doctest::Contains("scenario packets"), ConfigError);
	auto bad = scps;
	bad[0].links[0].buffer_delay = 20000;
	CHECK_THROWS_WITH_AS(run_emulation(s, p, bad, 100), doctest::Contains("node 'tx' at cycle 0"), ConfigError);
	bad = scps;
	bad[0].links[0].dst = 0;
	CHECK_THROWS_AS(run_emulation(s, p, bad, 100), ConfigError);
}

TEST_CASE("links below the minimum range are blanked") {
	const auto& p = preset_by_name("asic4");
	const Scene s = two_node(400.0);  // ~691 samples, below one bank depth
	CHECK_THROWS_WITH_AS(compile_scene(s, p, 1), doctest::Contains("below the minimum emulable range"), DomainError);
	const auto f = compile_scene(s, p, 1, {false});
	const auto run = run_emulation(s, p, packets(f), 8192);
	for (const auto& x : run.captured[1]) REQUIRE(x == kZeroSample);
	CHECK(run.totals.blanked_output_scenarios == 1);
	const auto g = golden_scene_run(build_golden_scene(s, p, f, 8192), 8192);
	for (const auto& x : g.received[1]) REQUIRE(x == cd{});
}

TEST_CASE("capture CSV round trip") {
	const auto& p = preset_by_name("asic4");
	const Scene s = two_node(2500.0);
	const auto run = run_emulation(s, p, packets(compile_scene(s, p, 1)), 8192);
	const auto text = capture_csv(run);
	CHECK(text.rfind("cycle,node,i,q\n0,rx,0,0\n", 0) == 0);
	const auto back = parse_capture_csv(text);
	REQUIRE(back.size() == 1);
	CHECK(back[0].first == "rx");
	CHECK(back[0].second == run.captured[1]);
	CHECK_THROWS_AS(parse_capture_csv("cycle,node,i,q\n1,rx,0,0\n"), ParseError);
	CHECK_THROWS_AS(parse_capture_csv("t,i,q\n"), ParseError);
	CHECK_THROWS_AS(parse_capture_csv("cycle,node,i,q\n0,rx,x,0\n"), ParseError);
	CHECK(correlation_csv(std::vector<double>{0.5, 2.0}) == "lag,amplitude\n0,0.5\n1,2\n");
}
