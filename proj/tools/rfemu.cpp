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

// rfemu command-line tool.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "rfemu/errors.hpp"
#include "rfemu/harness.hpp"

using namespace rfemu;
using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

std::string read_text(const fs::path& p) {
	std::ifstream in(p, std::ios::binary);
	if (!in) throw ConfigError("cannot open '" + p.string() + "'");
	return {std::istreambuf_iterator<char>(in), {}};
}

void write_text(const fs::path& p, std::string_view text) {
	std::ofstream out(p, std::ios::binary);
	if (!out) throw ConfigError("cannot write '" + p.string() + "'");
	out.write(text.data(), std::streamsize(text.size()));
}

std::int64_t frames_for(const Scene& s, std::int64_t cycles) {
	return (cycles + s.scenario_length - 1) / s.scenario_length;
}

const SceneObject& first_transmitter(const Scene& s) {
	for (const auto& o : s.objects)
		if (o.transmits) return o;
	throw ConfigError("scene has no transmitter");
}

// Ranges file: one range in metres per line; a non-numeric first line is a header.
std::vector<double> read_ranges(const fs::path& p) {
	std::istringstream in(read_text(p));
	std::vector<double> out;
	std::string line;
	for (int n = 1; std::getline(in, line); ++n) {
		const auto field = line.substr(0, line.find(','));
		if (field.find_first_not_of(" \t\r") == std::string::npos) continue;
		try {
			std::size_t used = 0;
			out.push_back(std::stod(field, &used));
		} catch (const std::exception&) {
			if (n == 1) continue;
			throw ParseError("'" + p.string() + "' line " + std::to_string(n) + ": not a number", 0);
		}
	}
	return out;
}

json link_json(const LinkEntry& l) {
	json taps = json::array();
	for (const auto& t : l.fdc_taps.taps) taps.push_back(widen(t).value());
	return {{"src", l.src},           {"dst", l.dst},
	        {"buffer_delay", l.buffer_delay}, {"mu", l.mu()},
	        {"fdc_taps", taps},       {"alpha", l.alpha.value()},
	        {"beta_rho", l.beta_rho.value()}, {"g_t", l.g_t.value()},
	        {"g_r", l.g_r.value()},   {"doppler_hz", l.doppler_hz}};
}

struct SceneArgs {
	std::string scene;
	std::string preset = "asic4";
	bool non_strict = false;
};

void add_scene_args(CLI::App* cmd, SceneArgs& a) {
	cmd->add_option("--scene", a.scene, "Scene description (JSON)")->required()->check(CLI::ExistingFile);
	cmd->add_option("--preset", a.preset, "Hardware preset")->check(CLI::IsMember({"asic4", "fpga6", "fpga9", "sim16"}));
	cmd->add_flag("--non-strict", a.non_strict, "Encode links below the minimum range (they are blanked)");
}

int cmd_presets() {
	std::printf("%-6s %4s %6s %6s %8s %12s %10s %10s\n", "name", "P", "S", "RTR", "latency", "rate_hz", "min_delay",
	            "max_delay");
	for (const auto& p : all_presets())
		std::printf("%-6s %4d %6d %6d %8d %12.4g %10lld %10lld\n", p.name.c_str(), p.geometry.banks,
		            p.geometry.bank_depth, p.geometry.rtr_depth, p.compute_latency, p.sample_rate_hz,
		            (long long)p.min_total_delay(), (long long)p.max_buffer_delay());
	return 0;
}

int cmd_compile(const SceneArgs& a, int frames, const std::string& out, const std::string& scp_out) {
	const Scene s = load_scene(a.scene);
	const auto& p = preset_by_name(a.preset);
	const auto sol = compile_scene(s, p, frames, {!a.non_strict});
	json j;
	j["preset"] = p.name;
	j["sample_rate_hz"] = s.rate(p);
	auto& fr = j["frames"] = json::array();
	for (const auto& f : sol) {
		json links = json::array();
		for (const auto& l : f.scp.links) links.push_back(link_json(l));
		fr.push_back({{"scenario_id", f.scp.scenario_id}, {"links", links}});
	}
	if (out.empty())
		std::cout << j.dump(2) << "\n";
	else
		write_text(out, j.dump(2) + "\n");
	if (!scp_out.empty()) {
		std::vector<ScenarioConfigPacket> scps;
		for (const auto& f : sol) scps.push_back(f.scp);
		const auto bytes = scp_encode_all(scps);
		write_text(scp_out, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
	}
	return 0;
}

int cmd_run(const SceneArgs& a, std::int64_t cycles, int threads, const std::string& scp_in, const std::string& out) {
	const Scene s = load_scene(a.scene);
	const auto& p = preset_by_name(a.preset);
	std::vector<ScenarioConfigPacket> scps;
	if (!scp_in.empty()) {
		const auto text = read_text(scp_in);
		scps = scp_decode_all(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
	} else {
		for (const auto& f : compile_scene(s, p, int(frames_for(s, cycles)), {!a.non_strict})) scps.push_back(f.scp);
	}
	const auto run = run_emulation(s, p, scps, cycles, {threads});

	const fs::path run_path(out);
	fs::path capture = run_path;
	capture.replace_extension(".capture.csv");
	fs::path instr = run_path;
	instr.replace_extension(".instrumentation.json");
	write_text(capture, capture_csv(run));
	write_text(instr, instrumentation_json(run) + "\n");

	json ref = json::array();
	for (const auto& x : first_transmitter(s).waveform->drfg.iq_pattern) ref.push_back({x.re.value(), x.im.value()});
	json j;
	j["scene"] = fs::absolute(a.scene).string();
	j["preset"] = p.name;
	j["sample_rate_hz"] = run.sample_rate_hz;
	j["cycles"] = cycles;
	j["scenario_length"] = run.scenario_length;
	j["receivers"] = json::array();
	for (auto r : run.receivers()) j["receivers"].push_back(run.nodes[r].id);
	j["capture"] = capture.filename().string();
	j["instrumentation"] = instr.filename().string();
	j["reference"] = ref;
	write_text(run_path, j.dump(2) + "\n");
	std::fprintf(stderr, "%lld cycles, %lld scenarios, %lld port conflicts, %lld PB underflows -> %s\n",
	             (long long)cycles, (long long)run.scenarios_applied, (long long)run.totals.port_conflicts,
	             (long long)run.totals.pb_underflows, capture.string().c_str());
	return 0;
}

struct AnalyzeArgs {
	std::string run, expected, node, out, correlation;
	double threshold = 0.3;
	int min_separation = 16;
	bool two_way = false;
	bool check = false;
	double max_error_pct = 1.0;
};

int cmd_analyze(const AnalyzeArgs& a) {
	const auto meta = json::parse(read_text(a.run));
	const fs::path dir = fs::path(a.run).parent_path();
	const auto streams = parse_capture_csv(read_text(dir / meta.at("capture").get<std::string>()));
	const std::vector<ComplexSample>* captured = nullptr;
	for (const auto& [id, x] : streams)
		if (a.node.empty() ? captured == nullptr : id == a.node) captured = &x;
	if (!captured) throw ConfigError(a.node.empty() ? "run has no receivers" : "no receiver '" + a.node + "' in run");
	Stream ref;
	for (const auto& v : meta.at("reference")) ref.emplace_back(v.at(0).get<double>(), v.at(1).get<double>());

	const auto corr = matched_filter(to_stream(*captured), ref);
	const auto peaks = detect_peaks(corr, {a.threshold, a.min_separation});
	double mps = kSpeedOfLight / meta.at("sample_rate_hz").get<double>();
	if (a.two_way) mps /= 2.0;
	const auto expected = a.expected.empty() ? std::vector<double>{} : read_ranges(a.expected);
	const auto report = range_metrics(peaks, expected, mps);
	if (!a.correlation.empty()) write_text(a.correlation, correlation_csv(corr));
	const auto text = range_report_json(report) + "\n";
	if (a.out.empty())
		std::cout << text;
	else
		write_text(a.out, text);

	if (!a.check) return 0;
	bool ok = report.misses == 0;
	for (const auto& m : report.matches)
		if (m.peak && m.error_pct > a.max_error_pct) ok = false;
	if (!ok) std::fprintf(stderr, "check failed: %d misses or error above %.3g%%\n", report.misses, a.max_error_pct);
	return ok ? 0 : 3;
}

int cmd_golden(const SceneArgs& a, std::int64_t cycles, const std::string& out, const std::string& run_path,
               bool check, double max_rms) {
	const Scene s = load_scene(a.scene);
	const auto& p = preset_by_name(a.preset);
	const auto frames = compile_scene(s, p, int(frames_for(s, cycles)), {!a.non_strict});
	const auto g = golden_scene_run(build_golden_scene(s, p, frames, cycles), cycles);
	if (!out.empty()) {
		std::string csv = "cycle,node,i,q\n";
		char buf[96];
		for (std::size_t n = 0; n < s.objects.size(); ++n) {
			if (!s.objects[n].receives) continue;
			for (std::size_t t = 0; t < g.received[n].size(); ++t) {
				std::snprintf(buf, sizeof buf, "%zu,%s,%.17g,%.17g\n", t, s.objects[n].id.c_str(), g.received[n][t].real(),
				              g.received[n][t].imag());
				csv += buf;
			}
		}
		write_text(out, csv);
	}
	if (run_path.empty()) return 0;
	const auto meta = json::parse(read_text(run_path));
	const auto streams = parse_capture_csv(read_text(fs::path(run_path).parent_path() / meta.at("capture").get<std::string>()));
	bool ok = true;
	for (const auto& [id, x] : streams) {
		std::size_t n = 0;
		while (n < s.objects.size() && s.objects[n].id != id) ++n;
		if (n == s.objects.size()) throw ConfigError("receiver '" + id + "' is not in the scene");
		const auto c = compare_to_golden(x, g.received[n], default_warmup(s, p));
		std::printf("%s: rms_rel_error %.6e, max_abs_error %.6e over %lld samples\n", id.c_str(), c.rms_rel_error,
		            c.max_abs_error, (long long)c.samples);
		if (c.rms_rel_error >= max_rms) ok = false;
	}
	return check && !ok ? 3 : 0;
}

int cmd_dump_minif10() {
	std::printf("code,value\n");
	for (int c = 0; c < 1024; ++c) std::printf("0x%03X,%.17g\n", c, widen(MiniF10::from_bits(std::uint16_t(c))).value());
	return 0;
}

}  // namespace

int main(int argc, char** argv) {
	CLI::App app{"Cycle-level simulator of a direct-path-compute-model RF emulation accelerator"};
	app.require_subcommand(1);

	auto* presets_cmd = app.add_subcommand("presets", "List hardware presets");

	SceneArgs compile_args;
	int frames = 1;
	std::string compile_out, scp_out;
	auto* compile = app.add_subcommand("compile-scene", "Solve scene frames into scenario configuration packets");
	add_scene_args(compile, compile_args);
	compile->add_option("--frames", frames, "Number of frames")->check(CLI::PositiveNumber);
	compile->add_option("--out", compile_out, "Packet summary JSON (default stdout)");
	compile->add_option("--scp", scp_out, "Binary packet stream");

	SceneArgs run_args;
	std::int64_t cycles = 0;
	int threads = 1;
	std::string run_out = "run.json", scp_in;
	auto* run = app.add_subcommand("run", "Run the cycle-level emulation");
	add_scene_args(run, run_args);
	run->add_option("--cycles", cycles, "Cycles to simulate")->required()->check(CLI::PositiveNumber);
	run->add_option("--threads", threads, "Worker threads (0: hardware concurrency)")->check(CLI::NonNegativeNumber);
	run->add_option("--scp", scp_in, "Use a compiled packet stream instead of solving the scene")->check(CLI::ExistingFile);
	run->add_option("--out", run_out, "Run description; capture and instrumentation are written beside it");

	AnalyzeArgs an;
	auto* analyze = app.add_subcommand("analyze", "Matched-filter a captured stream and estimate ranges");
	analyze->add_option("--run", an.run, "run.json from 'run'")->required()->check(CLI::ExistingFile);
	analyze->add_option("--expected", an.expected, "Expected ranges in metres, one per line")->check(CLI::ExistingFile);
	analyze->add_option("--node", an.node, "Receiver id (default: first receiver)");
	analyze->add_option("--threshold", an.threshold, "Peak threshold relative to the global maximum");
	analyze->add_option("--min-separation", an.min_separation, "Minimum peak separation in samples");
	analyze->add_flag("--two-way", an.two_way, "Report one-way range of a round-trip (monostatic) delay");
	analyze->add_option("--out", an.out, "Range report JSON (default stdout)");
	analyze->add_option("--correlation", an.correlation, "Write the correlation as CSV");
	analyze->add_flag("--check", an.check, "Exit non-zero on a miss or an error above --max-error-pct");
	analyze->add_option("--max-error-pct", an.max_error_pct, "Range error threshold for --check");

	SceneArgs golden_args;
	std::int64_t golden_cycles = 0;
	std::string golden_out, golden_run;
	bool golden_check = false;
	double max_rms = 5e-2;
	auto* golden = app.add_subcommand("golden", "Run the floating-point reference model");
	add_scene_args(golden, golden_args);
	golden->add_option("--cycles", golden_cycles, "Samples to compute")->required()->check(CLI::PositiveNumber);
	golden->add_option("--out", golden_out, "Receiver streams as CSV");
	golden->add_option("--run", golden_run, "Compare against this run.json")->check(CLI::ExistingFile);
	golden->add_flag("--check", golden_check, "Exit non-zero when the RMS relative error reaches --max-rms");
	golden->add_option("--max-rms", max_rms, "RMS relative error threshold for --check");

	auto* dump = app.add_subcommand("dump-minif10", "Print every 10-bit coefficient code and its value");

	CLI11_PARSE(app, argc, argv);
	try {
		if (presets_cmd->parsed()) return cmd_presets();
		if (compile->parsed()) return cmd_compile(compile_args, frames, compile_out, scp_out);
		if (run->parsed()) return cmd_run(run_args, cycles, threads, scp_in, run_out);
		if (analyze->parsed()) return cmd_analyze(an);
		if (golden->parsed())
			return cmd_golden(golden_args, golden_cycles, golden_out, golden_run, golden_check, max_rms);
		if (dump->parsed()) return cmd_dump_minif10();
	} catch (const std::exception& e) {
		std::fprintf(stderr, "rfemu: %s\n", e.what());
		return 2;
	}
	return 1;
}
