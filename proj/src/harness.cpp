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

#include "rfemu/harness.hpp"

#include <algorithm>
#include <barrier>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <thread>

#include "json.hpp"
#include "rfemu/errors.hpp"

namespace rfemu {

namespace {

struct Node {
	int index = 0;
	const SceneObject* obj = nullptr;
	std::vector<int> out_links;
	std::vector<int> in_links;
	std::unique_ptr<DelayDistributor> dd;
	std::vector<OutputLane> lanes;
	std::vector<DopplerFsm> fsms;
	std::vector<ComplexSample> in_buf;
	std::vector<F16> alphas;
	std::vector<F16> g_rs;
	std::vector<ComplexSample>* capture = nullptr;
	std::int64_t doppler_commits = 0;
};

std::vector<OutputDelaySpec> delay_specs(const Node& n, const ScenarioConfigPacket& scp) {
	std::vector<OutputDelaySpec> specs;
	for (std::size_t m = 0; m < n.out_links.size(); ++m) {
		specs.push_back({int(m), std::int64_t(scp.links[std::size_t(n.out_links[m])].buffer_delay)});
	}
	return specs;
}

std::vector<double> doppler_hz(const Node& n, const ScenarioConfigPacket& scp, int unit) {
	std::vector<double> hz;
	for (std::size_t m = std::size_t(unit) * DopplerFsm::kMaxOutputs;
	     m < std::min(n.out_links.size(), std::size_t(unit + 1) * DopplerFsm::kMaxOutputs); ++m) {
		hz.push_back(scp.links[std::size_t(n.out_links[m])].doppler_hz);
	}
	return hz;
}

void step_node(Node& n, std::int64_t t, const std::vector<ComplexSample>& cur, std::vector<ComplexSample>& next) {
	ComplexSample v = kZeroSample;
	if (!n.in_links.empty()) {
		for (std::size_t m = 0; m < n.in_links.size(); ++m) n.in_buf[m] = cur[std::size_t(n.in_links[m])];
		if (n.obj->reflects) v = receiver_accumulate(n.in_buf, n.alphas);
		if (n.capture) (*n.capture)[std::size_t(t)] = receiver_accumulate(n.in_buf, n.g_rs);
	}
	if (!n.dd) return;
	const ComplexSample u = n.obj->transmits ? n.obj->waveform->sample(t) : v;
	const auto leads = n.dd->cycle(u);
	for (auto& f : n.fsms) {
		if (f.step()) ++n.doppler_commits;
	}
	for (std::size_t m = 0; m < n.lanes.size(); ++m) {
		const auto& coeff = n.fsms[m / DopplerFsm::kMaxOutputs].coefficient(int(m % DopplerFsm::kMaxOutputs));
		next[std::size_t(n.out_links[m])] = n.lanes[m].cycle(leads[m], coeff);
	}
}

[[noreturn]] void rethrow_at(const std::exception& e, const Node& n, std::int64_t cycle) {
	const std::string where = "node '" + n.obj->id + "' at cycle " + std::to_string(cycle) + ": ";
	if (dynamic_cast<const ContractViolation*>(&e)) throw ContractViolation(where + e.what());
	if (dynamic_cast<const DomainError*>(&e)) throw DomainError(where + e.what());
	throw ConfigError(where + e.what());
}

}  // namespace

std::vector<int> EmulationRun::receivers() const {
	std::vector<int> r;
	for (std::size_t j = 0; j < captured.size(); ++j) {
		if (!captured[j].empty()) r.push_back(int(j));
	}
	return r;
}

EmulationRun run_emulation(const Scene& scene, const Preset& preset, std::span<const ScenarioConfigPacket> scps,
                           std::int64_t n_cycles, const RunOptions& opts) {
	scene.validate();
	preset.geometry.validate();
	if (n_cycles < 0) throw ConfigError("cycle count must be non-negative");
	const std::int64_t sl = scene.scenario_length;
	const std::int64_t n_scen = (n_cycles + sl - 1) / sl;
	if (std::int64_t(scps.size()) < n_scen) {
		throw ConfigError("run of " + std::to_string(n_cycles) + " cycles needs " + std::to_string(n_scen) +
		                  " scenario packets, got " + std::to_string(scps.size()));
	}

	EmulationRun run;
	run.preset = preset.name;
	run.sample_rate_hz = scene.rate(preset);
	run.n_cycles = n_cycles;
	run.scenario_length = sl;
	run.links = scene_links(scene);
	const std::size_t n_links = run.links.size();
	for (const auto& scp : scps.first(std::size_t(n_scen))) {
		if (scp.links.size() != n_links) throw ConfigError("packet link count does not match the scene");
		for (std::size_t l = 0; l < n_links; ++l) {
			if (scp.links[l].src != run.links[l].first || scp.links[l].dst != run.links[l].second) {
				throw ConfigError("packet " + std::to_string(scp.scenario_id) + " link " + std::to_string(l) +
				                  " does not match the scene link order");
			}
		}
	}

	const std::size_t n_nodes = scene.objects.size();
	run.captured.resize(n_nodes);
	std::vector<Node> nodes(n_nodes);
	for (std::size_t j = 0; j < n_nodes; ++j) {
		nodes[j].index = int(j);
		nodes[j].obj = &scene.objects[j];
		if (scene.objects[j].receives) {
			run.captured[j].assign(std::size_t(n_cycles), kZeroSample);
			nodes[j].capture = &run.captured[j];
		}
	}
	for (std::size_t l = 0; l < n_links; ++l) {
		nodes[std::size_t(run.links[l].first)].out_links.push_back(int(l));
		nodes[std::size_t(run.links[l].second)].in_links.push_back(int(l));
	}
	for (auto& n : nodes) {
		const int outs = int(n.out_links.size());
		n.in_buf.assign(n.in_links.size(), kZeroSample);
		n.alphas.assign(n.in_links.size(), F16{});
		n.g_rs.assign(n.in_links.size(), F16{});
		if (outs == 0) continue;
		n.dd = std::make_unique<DelayDistributor>(preset.geometry, outs);
		n.lanes.assign(std::size_t(outs), OutputLane(preset.compute_latency));
		for (int u = 0; u * DopplerFsm::kMaxOutputs < outs; ++u) {
			n.fsms.emplace_back(std::min(DopplerFsm::kMaxOutputs, outs - u * DopplerFsm::kMaxOutputs), run.sample_rate_hz,
			                    preset.compute_latency - 1);
		}
	}

	// Boundary k: activate plan k, apply scenario k gains and taps, then look
	// ahead to k + 1 (prefetch plan and Doppler staging).
	std::vector<GddcPlan> next_plan(n_nodes);
	auto boundary = [&](std::int64_t k) {
		const std::int64_t t = k * sl;
		const auto& scp = scps[std::size_t(k)];
		const bool has_next = k + 1 < n_scen;
		for (auto& n : nodes) {
			try {
				for (std::size_t m = 0; m < n.in_links.size(); ++m) {
					const auto& e = scp.links[std::size_t(n.in_links[m])];
					n.alphas[m] = e.alpha;
					n.g_rs[m] = e.g_r;
				}
				if (!n.dd) continue;
				const GddcPlan plan = k == 0 ? gddc_parse(delay_specs(n, scp), preset.geometry, 0, 0)
				                             : std::move(next_plan[std::size_t(n.index)]);
				n.dd->activate(plan);
				if (has_next) {
					next_plan[std::size_t(n.index)] =
					    gddc_parse(delay_specs(n, scps[std::size_t(k + 1)]), preset.geometry, t + sl, t);
					n.dd->prepare(next_plan[std::size_t(n.index)]);
				}
				for (std::size_t m = 0; m < n.lanes.size(); ++m) {
					const auto& e = scp.links[std::size_t(n.out_links[m])];
					n.lanes[m].configure(e.fdc_taps, {e.g_t, e.beta_rho}, n.obj->transmits);
				}
				for (std::size_t u = 0; u < n.fsms.size(); ++u) {
					if (k == 0) n.fsms[u].reset(doppler_hz(n, scp, int(u)), 0);
					if (has_next) n.fsms[u].stage(doppler_hz(n, scps[std::size_t(k + 1)], int(u)), t + sl);
				}
			} catch (const std::exception& e) {
				rethrow_at(e, n, t);
			}
		}
	};

	std::vector<ComplexSample> regs[2] = {std::vector<ComplexSample>(n_links, kZeroSample),
	                                      std::vector<ComplexSample>(n_links, kZeroSample)};
	const int wanted = opts.threads > 0 ? opts.threads : int(std::thread::hardware_concurrency());
	const int threads = std::clamp(wanted, 1, std::max(1, int(n_nodes)));

	for (std::int64_t k = 0; k < n_scen; ++k) {
		boundary(k);
		++run.scenarios_applied;
		const std::int64_t begin = k * sl;
		const std::int64_t end = std::min(n_cycles, begin + sl);
		if (threads == 1) {
			for (std::int64_t t = begin; t < end; ++t) {
				auto& cur = regs[t & 1];
				auto& next = regs[(t + 1) & 1];
				for (auto& n : nodes) step_node(n, t, cur, next);
			}
			continue;
		}
		std::barrier sync(threads);
		auto worker = [&](int id) {
			for (std::int64_t t = begin; t < end; ++t) {
				auto& cur = regs[t & 1];
				auto& next = regs[(t + 1) & 1];
				for (std::size_t j = std::size_t(id); j < n_nodes; j += std::size_t(threads)) {
					step_node(nodes[j], t, cur, next);
				}
				sync.arrive_and_wait();
			}
		};
		std::vector<std::jthread> pool;
		for (int id = 1; id < threads; ++id) pool.emplace_back(worker, id);
		worker(0);
	}

	for (const auto& n : nodes) {
		NodeStats s;
		s.id = n.obj->id;
		s.outputs = int(n.out_links.size());
		s.doppler_units = int(n.fsms.size());
		if (n.dd) s.controlpath = n.dd->counters();
		run.totals += s.controlpath;
		run.doppler_commits += n.doppler_commits;
		run.nodes.push_back(std::move(s));
	}
	return run;
}

Stream transmit_stream(const TxWaveform& waveform, std::int64_t n) {
	Stream s(std::size_t(std::max<std::int64_t>(n, 0)));
	for (std::int64_t t = 0; t < n; ++t) s[std::size_t(t)] = waveform.sample(t).value();
	return s;
}

Stream to_stream(std::span<const ComplexSample> x) {
	Stream s(x.size());
	for (std::size_t i = 0; i < x.size(); ++i) s[i] = x[i].value();
	return s;
}

GoldenScene build_golden_scene(const Scene& scene, const Preset& preset, std::span<const FrameSolution> frames,
                               std::int64_t n_cycles) {
	GoldenScene g;
	g.sample_rate_hz = scene.rate(preset);
	g.scenario_length = scene.scenario_length;
	for (const auto& o : scene.objects) {
		GoldenNode n{o.transmits, o.reflects, o.receives, {}};
		if (o.transmits && o.waveform) n.source = transmit_stream(*o.waveform, n_cycles);
		g.nodes.push_back(std::move(n));
	}
	for (const auto& f : frames) {
		std::vector<GoldenLink> links;
		for (std::size_t l = 0; l < f.exact.size(); ++l) {
			// Mirror the DUT: links inside the first bank are blanked there.
			if (std::int64_t(f.scp.links[l].buffer_delay) < preset.geometry.bank_depth) continue;
			const auto& e = f.exact[l];
			links.push_back({e.src, e.dst, e.delay_samples, e.doppler_hz, e.alpha, e.beta_rho, e.g_t, e.g_r});
		}
		g.scenarios.push_back(std::move(links));
	}
	return g;
}

std::vector<double> matched_filter(std::span<const std::complex<double>> captured,
                                   std::span<const std::complex<double>> reference) {
	std::vector<double> out(captured.size(), 0.0);
	const std::size_t k_len = reference.size();
	for (std::size_t n = 0; n < captured.size(); ++n) {
		const std::size_t k_end = std::min(k_len, captured.size() - n);
		std::complex<double> acc = 0.0;
		for (std::size_t k = 0; k < k_end; ++k) acc += captured[n + k] * std::conj(reference[k]);
		out[n] = std::abs(acc);
	}
	return out;
}

std::vector<Peak> detect_peaks(std::span<const double> corr, const PeakOptions& opts) {
	if (!(opts.threshold_frac > 0.0 && opts.threshold_frac <= 1.0)) {
		throw DomainError("peak threshold fraction must lie in (0, 1]");
	}
	std::vector<Peak> candidates;
	if (corr.empty()) return candidates;
	const double top = *std::max_element(corr.begin(), corr.end());
	if (!(top > 0.0)) return candidates;
	const double thr = opts.threshold_frac * top;
	const std::size_t n = corr.size();
	for (std::size_t a = 0; a < n;) {
		std::size_t b = a;
		while (b + 1 < n && corr[b + 1] == corr[a]) ++b;
		const double v = corr[a];
		const bool rises = a == 0 || corr[a - 1] < v;
		const bool falls = b + 1 == n || corr[b + 1] < v;
		if (rises && falls && v >= thr) {
			Peak p{std::int64_t(a), double(a), v};
			if (a > 0 && a + 1 < n) {
				const double y0 = corr[a - 1], y1 = corr[a], y2 = corr[a + 1];
				const double den = y0 - 2.0 * y1 + y2;
				if (den < 0.0) p.lag += std::clamp(0.5 * (y0 - y2) / den, -0.5, 0.5);
			}
			candidates.push_back(p);
		}
		a = b + 1;
	}
	std::stable_sort(candidates.begin(), candidates.end(), [](const Peak& x, const Peak& y) {
		return x.amplitude != y.amplitude ? x.amplitude > y.amplitude : x.index < y.index;
	});
	std::vector<Peak> kept;
	for (const auto& c : candidates) {
		const bool clear = std::none_of(kept.begin(), kept.end(), [&](const Peak& k) {
			return std::llabs(k.index - c.index) < opts.min_separation;
		});
		if (clear) kept.push_back(c);
	}
	std::sort(kept.begin(), kept.end(), [](const Peak& x, const Peak& y) { return x.index < y.index; });
	return kept;
}

RangeReport range_metrics(std::span<const Peak> peaks, std::span<const double> expected_ranges_m,
                          double meters_per_sample) {
	RangeReport r;
	r.peaks.assign(peaks.begin(), peaks.end());
	for (const auto& p : peaks) r.est_ranges_m.push_back(p.lag * meters_per_sample);

	struct Pair {
		double dist;
		std::size_t e, p;
	};
	std::vector<Pair> pairs;
	for (std::size_t e = 0; e < expected_ranges_m.size(); ++e) {
		for (std::size_t p = 0; p < peaks.size(); ++p) {
			pairs.push_back({std::fabs(r.est_ranges_m[p] - expected_ranges_m[e]), e, p});
		}
	}
	std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.dist < b.dist; });
	std::vector<int> peak_of(expected_ranges_m.size(), -1);
	std::vector<bool> used(peaks.size(), false);
	for (const auto& pr : pairs) {
		if (peak_of[pr.e] >= 0 || used[pr.p]) continue;
		peak_of[pr.e] = int(pr.p);
		used[pr.p] = true;
	}

	double sq = 0.0;
	int matched = 0;
	for (std::size_t e = 0; e < expected_ranges_m.size(); ++e) {
		RangeMatch m;
		m.expected_m = expected_ranges_m[e];
		if (peak_of[e] < 0) {
			m.error_m = m.error_pct = std::numeric_limits<double>::infinity();
			++r.misses;
		} else {
			m.peak = peaks[std::size_t(peak_of[e])];
			m.est_range_m = r.est_ranges_m[std::size_t(peak_of[e])];
			m.error_m = m.est_range_m - m.expected_m;
			m.error_pct = 100.0 * std::fabs(m.error_m) / std::fabs(m.expected_m);
			sq += m.error_m * m.error_m;
			++matched;
		}
		r.matches.push_back(m);
	}
	r.mse = matched > 0 ? sq / matched : 0.0;
	return r;
}

GoldenComparison compare_to_golden(std::span<const ComplexSample> dut, std::span<const std::complex<double>> golden,
                                   std::int64_t warmup) {
	if (dut.size() != golden.size()) {
		throw ConfigError("DUT stream has " + std::to_string(dut.size()) + " samples, golden has " +
		                  std::to_string(golden.size()));
	}
	if (warmup < 0 || warmup >= std::int64_t(dut.size())) {
		throw ConfigError("warm-up of " + std::to_string(warmup) + " samples leaves nothing to compare in a stream of " +
		                  std::to_string(dut.size()));
	}
	GoldenComparison c;
	double err = 0.0, ref = 0.0;
	for (std::size_t i = std::size_t(warmup); i < dut.size(); ++i) {
		const double d = std::abs(dut[i].value() - golden[i]);
		err += d * d;
		ref += std::norm(golden[i]);
		c.max_abs_error = std::max(c.max_abs_error, d);
		++c.samples;
	}
	c.rms_rel_error = ref > 0.0 ? std::sqrt(err / ref) : (err > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
	return c;
}

std::int64_t default_warmup(const Scene& scene, const Preset& preset) {
	return scene.scenario_length + preset.max_buffer_delay() + preset.compute_latency;
}

std::string instrumentation_json(const EmulationRun& run) {
	auto counters = [](const ControlpathCounters& c) {
		return nlohmann::ordered_json{{"bank_reads", c.bank_reads},
		                              {"bank_writes", c.bank_writes},
		                              {"port_conflicts", c.port_conflicts},
		                              {"wrap_band_reads", c.wrap_band_reads},
		                              {"handoffs", c.handoffs},
		                              {"multicasts", c.multicasts},
		                              {"prefetch_resident", c.prefetch_resident},
		                              {"prefetch_streaming", c.prefetch_streaming},
		                              {"pb_underflows", c.pb_underflows},
		                              {"blanked_output_scenarios", c.blanked_output_scenarios},
		                              {"grouped_output_scenarios", c.grouped_output_scenarios},
		                              {"collision_groups", c.collision_groups}};
	};
	nlohmann::ordered_json j;
	j["preset"] = run.preset;
	j["sample_rate_hz"] = run.sample_rate_hz;
	j["n_cycles"] = run.n_cycles;
	j["scenario_length"] = run.scenario_length;
	j["scenarios_applied"] = run.scenarios_applied;
	j["doppler_commits"] = run.doppler_commits;
	j["totals"] = counters(run.totals);
	auto& nodes = j["nodes"] = nlohmann::ordered_json::array();
	for (const auto& n : run.nodes) {
		nodes.push_back({{"id", n.id},
		                 {"outputs", n.outputs},
		                 {"doppler_units", n.doppler_units},
		                 {"controlpath", counters(n.controlpath)}});
	}
	return j.dump(2);
}

namespace {

void append_number(std::string& out, double v) {
	char buf[32];
	const auto r = std::to_chars(buf, buf + sizeof buf, v);
	out.append(buf, r.ptr);
}

}  // namespace

std::string capture_csv(const EmulationRun& run) {
	std::string out = "cycle,node,i,q\n";
	for (std::size_t n = 0; n < run.captured.size(); ++n) {
		const auto& id = run.nodes[n].id;
		for (std::size_t t = 0; t < run.captured[n].size(); ++t) {
			out += std::to_string(t);
			out += ',';
			out += id;
			out += ',';
			append_number(out, run.captured[n][t].re.value());
			out += ',';
			append_number(out, run.captured[n][t].im.value());
			out += '\n';
		}
	}
	return out;
}

std::vector<std::pair<std::string, std::vector<ComplexSample>>> parse_capture_csv(std::string_view text) {
	std::vector<std::pair<std::string, std::vector<ComplexSample>>> out;
	std::size_t pos = 0, line = 0;
	auto fail = [&](const char* what) {
		throw ParseError("capture line " + std::to_string(line + 1) + ": " + what, pos);
	};
	while (pos < text.size()) {
		const auto eol = std::min(text.find('\n', pos), text.size());
		const auto row = text.substr(pos, eol - pos);
		if (line++ == 0) {
			if (row != "cycle,node,i,q") fail("expected header 'cycle,node,i,q'");
		} else if (!row.empty()) {
			std::string_view f[4];
			std::size_t a = 0;
			for (int k = 0; k < 4; ++k) {
				const auto b = k == 3 ? row.size() : row.find(',', a);
				if (b == std::string_view::npos) fail("expected 4 fields");
				f[k] = row.substr(a, b - a);
				a = b + 1;
			}
			std::int64_t cycle = 0;
			double i = 0, q = 0;
			if (std::from_chars(f[0].data(), f[0].data() + f[0].size(), cycle).ec != std::errc{} ||
			    std::from_chars(f[2].data(), f[2].data() + f[2].size(), i).ec != std::errc{} ||
			    std::from_chars(f[3].data(), f[3].data() + f[3].size(), q).ec != std::errc{})
				fail("malformed number");
			if (out.empty() || out.back().first != f[1]) out.emplace_back(std::string(f[1]), std::vector<ComplexSample>{});
			auto& s = out.back().second;
			if (cycle != std::int64_t(s.size())) fail("cycles must be consecutive from 0 per node");
			s.push_back(ComplexSample::quantize({i, q}));
		}
		pos = eol + 1;
	}
	return out;
}

std::string correlation_csv(std::span<const double> corr) {
	std::string out = "lag,amplitude\n";
	for (std::size_t k = 0; k < corr.size(); ++k) {
		out += std::to_string(k);
		out += ',';
		append_number(out, corr[k]);
		out += '\n';
	}
	return out;
}

std::string range_report_json(const RangeReport& r) {
	nlohmann::ordered_json j;
	auto& peaks = j["peaks"] = nlohmann::ordered_json::array();
	for (std::size_t k = 0; k < r.peaks.size(); ++k)
		peaks.push_back({{"index", r.peaks[k].index},
		                 {"lag", r.peaks[k].lag},
		                 {"amplitude", r.peaks[k].amplitude},
		                 {"range_m", r.est_ranges_m[k]}});
	auto& matches = j["matches"] = nlohmann::ordered_json::array();
	for (const auto& m : r.matches) {
		nlohmann::ordered_json e{{"expected_m", m.expected_m}};
		if (m.peak) {
			e["estimated_m"] = m.est_range_m;
			e["error_m"] = m.error_m;
			e["error_pct"] = m.error_pct;
		} else {
			e["miss"] = true;
		}
		matches.push_back(e);
	}
	j["misses"] = r.misses;
	j["mse_m2"] = r.mse;
	return j.dump(2);
}

}  // namespace rfemu
