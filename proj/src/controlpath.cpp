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

#include "rfemu/controlpath.hpp"

#include <algorithm>
#include <cmath>

#include "rfemu/errors.hpp"
#include "rfemu/golden.hpp"

namespace rfemu {

void FifoGeometry::validate() const {
	if (banks < 1 || bank_depth < 1) throw ConfigError("FIFO geometry needs at least one bank of one row");
	if (rtr_depth < 1 || rtr_depth > bank_depth) throw ConfigError("RTR depth must lie in [1, bank depth]");
}

std::int64_t buffer_delay(double distance_m, double sample_rate_hz, int compute_latency) {
	if (!(distance_m > 0)) throw DomainError("distance must be positive");
	const auto samples = std::int64_t(std::llround(distance_m * sample_rate_hz / kSpeedOfLight));
	const std::int64_t d = samples - compute_latency;
	if (d < 0) {
		throw DomainError("distance below minimum emulable range: " + std::to_string(distance_m) + " m is " +
		                  std::to_string(samples) + " samples, compute latency is " + std::to_string(compute_latency));
	}
	return d;
}

std::int64_t min_emulable_delay(int bank_depth, int compute_latency) {
	return std::int64_t(bank_depth) + compute_latency;
}

SimoFifo::SimoFifo(FifoGeometry g) : geom_(g) {
	geom_.validate();
	mem_.assign(std::size_t(geom_.total_depth()), kZeroSample);
}

void SimoFifo::write(ComplexSample x) {
	mem_[std::size_t(write_address())] = x;
	++written_;
}

GddcPlan gddc_parse(std::span<const OutputDelaySpec> outputs, const FifoGeometry& geom, std::int64_t activation_cycle,
                    std::int64_t lookahead_start) {
	geom.validate();
	const std::int64_t n = geom.total_depth();
	GddcPlan plan;
	plan.activation_cycle = activation_cycle;
	plan.lookahead_start = lookahead_start;

	std::vector<OutputDelaySpec> live;
	for (const auto& o : outputs) {
		if (o.buffer_delay > n) {
			throw ConfigError("output " + std::to_string(o.output_id) + ": buffer delay " +
			                  std::to_string(o.buffer_delay) + " exceeds maximum emulation range of " +
			                  std::to_string(n) + " samples");
		}
		if (o.buffer_delay < geom.bank_depth) {
			plan.blanked.push_back(o.output_id);
		} else {
			live.push_back(o);
		}
	}
	std::stable_sort(live.begin(), live.end(),
	                 [](const auto& a, const auto& b) { return a.buffer_delay < b.buffer_delay; });

	auto add_reader = [&](const OutputDelaySpec& o) {
		const std::int64_t addr = ((activation_cycle - o.buffer_delay) % n + n) % n;
		plan.lddcs.push_back({o.output_id, int(addr / geom.bank_depth), int(addr % geom.bank_depth), o.buffer_delay,
		                      o.buffer_delay > n - geom.bank_depth});
	};

	// Greedy from the nearest output: everything within one bank depth of the
	// header joins its group.
	for (std::size_t i = 0; i < live.size();) {
		const auto& head = live[i];
		std::size_t j = i + 1;
		while (j < live.size() && live[j].buffer_delay - head.buffer_delay < geom.bank_depth) ++j;
		add_reader(head);
		if (j - i > 1) {
			CollisionGroup g{head.output_id, head.buffer_delay, {}};
			for (std::size_t k = i; k < j; ++k) {
				const std::int64_t off = live[k].buffer_delay - head.buffer_delay;
				if (off >= geom.rtr_depth) {
					throw ConfigError("outputs " + std::to_string(head.output_id) + " and " +
					                  std::to_string(live[k].output_id) + " collide " + std::to_string(off) +
					                  " samples apart: collision beyond protection range of " +
					                  std::to_string(geom.rtr_depth) + " samples");
				}
				g.members.push_back({live[k].output_id, off});
				if (off == 0) continue;
				// History the member needs before the header stream reaches it.
				const std::int64_t first = activation_cycle - head.buffer_delay - off;
				const std::int64_t last = activation_cycle - head.buffer_delay - 1;
				const std::int64_t lo = std::max<std::int64_t>(first, 0);
				if (last < lo) continue;
				const std::int64_t split = std::clamp(lookahead_start, lo, last + 1);
				if (split > lo) plan.prefetch.push_back({live[k].output_id, lo, split - lo, PrefetchSource::Resident});
				if (last + 1 > split) {
					plan.prefetch.push_back({live[k].output_id, split, last + 1 - split, PrefetchSource::Streaming});
				}
			}
			plan.groups.push_back(std::move(g));
		}
		i = j;
	}
	return plan;
}

ControlpathCounters& ControlpathCounters::operator+=(const ControlpathCounters& o) {
	bank_reads += o.bank_reads;
	bank_writes += o.bank_writes;
	port_conflicts += o.port_conflicts;
	wrap_band_reads += o.wrap_band_reads;
	handoffs += o.handoffs;
	multicasts += o.multicasts;
	prefetch_resident += o.prefetch_resident;
	prefetch_streaming += o.prefetch_streaming;
	pb_underflows += o.pb_underflows;
	blanked_output_scenarios += o.blanked_output_scenarios;
	grouped_output_scenarios += o.grouped_output_scenarios;
	collision_groups += o.collision_groups;
	return *this;
}

void DelayDistributor::Ring::push(ComplexSample x) {
	head = (head + 1) % data.size();
	data[head] = x;
}

ComplexSample DelayDistributor::Ring::at(std::int64_t back) const {
	const auto n = std::int64_t(data.size());
	return data[std::size_t(((std::int64_t(head) - back) % n + n) % n)];
}

void DelayDistributor::Ring::place(std::int64_t back, ComplexSample x) {
	const auto n = std::int64_t(data.size());
	data[std::size_t(((std::int64_t(head) - back) % n + n) % n)] = x;
}

void DelayDistributor::Ring::clear() {
	std::fill(data.begin(), data.end(), kZeroSample);
	head = 0;
}

DelayDistributor::DelayDistributor(FifoGeometry g, int outputs) : geom_(g), fifo_(g) {
	lddcs_.resize(std::size_t(geom_.banks));
	pecs_.resize(std::size_t(outputs));
	for (auto& p : pecs_) {
		for (auto& s : p.store) s.data.assign(std::size_t(geom_.rtr_depth), kZeroSample);
	}
	group_members_.resize(std::size_t(outputs));
	out_.assign(std::size_t(outputs), kZeroSample);
	lddc_out_.assign(std::size_t(outputs), kZeroSample);
	bank_use_.assign(std::size_t(geom_.banks), 0);
}

void DelayDistributor::activate(const GddcPlan& plan) {
	if (plan.activation_cycle != cycle_index()) {
		throw ContractViolation("plan for cycle " + std::to_string(plan.activation_cycle) + " activated at cycle " +
		                        std::to_string(cycle_index()));
	}
	for (const auto& job : jobs_) {
		if (job.done < job.count) ++counters_.pb_underflows;
	}
	jobs_.clear();

	for (auto& l : lddcs_) l.clear();
	for (auto& m : group_members_) m.clear();
	for (auto& p : pecs_) {
		p.rtr ^= 1;
		p.offset = -1;
		p.header = -1;
	}
	for (const auto& c : plan.lddcs) {
		if (c.output_id < 0 || c.output_id >= outputs()) throw ConfigError("LDDC config for unknown output");
		lddcs_[std::size_t(c.bank)].push_back({c.output_id, c.row, c.wrap_band});
	}
	for (const auto& g : plan.groups) {
		for (const auto& m : g.members) {
			auto& p = pecs_[std::size_t(m.output_id)];
			p.offset = m.offset;
			p.header = g.header_id;
			group_members_[std::size_t(g.header_id)].push_back(m.output_id);
		}
		counters_.grouped_output_scenarios += std::int64_t(g.members.size());
		++counters_.collision_groups;
	}
	counters_.blanked_output_scenarios += std::int64_t(plan.blanked.size());
}

void DelayDistributor::prepare(const GddcPlan& next) {
	for (auto& p : pecs_) {
		auto& pb = p.prefetch();
		pb.clear();
		pb.head = pb.data.size() - 1;
	}
	jobs_.clear();
	for (const auto& g : next.groups) {
		for (PrefetchSource src : {PrefetchSource::Resident, PrefetchSource::Streaming}) {
			PrefetchJob job{{}, 0, 0, 0, 0, src, g.header_delay, next.activation_cycle};
			std::int64_t end = 0;
			for (const auto& r : next.prefetch) {
				if (r.source != src) continue;
				const bool member = std::any_of(g.members.begin(), g.members.end(),
				                                [&](const GroupMember& m) { return m.output_id == r.output_id; });
				if (!member || r.count <= 0) continue;
				if (job.members.empty() || r.first_index < job.first) job.first = r.first_index;
				end = std::max(end, r.first_index + r.count);
				job.members.emplace_back(r.output_id, r.first_index);
			}
			if (job.members.empty()) continue;
			job.count = end - job.first;
			job.next = job.first;
			jobs_.push_back(std::move(job));
		}
	}
}

void DelayDistributor::place_prefetched(const PrefetchJob& job, std::int64_t index, ComplexSample x) {
	// After the header's first push at activation, back offset k reads sample
	// activation - header_delay - k; before that push it is one less.
	const std::int64_t back = job.activation - job.header_delay - index - 1;
	for (const auto& [id, first] : job.members) {
		if (index >= first) pecs_[std::size_t(id)].prefetch().place(back, x);
	}
}

std::span<const ComplexSample> DelayDistributor::cycle(ComplexSample incoming) {
	const std::int64_t s = geom_.bank_depth;
	const int write_bank = fifo_.bank_of(fifo_.write_address());
	std::fill(bank_use_.begin(), bank_use_.end(), 0);
	std::fill(out_.begin(), out_.end(), kZeroSample);

	// Phase 1: LDDC reads (read-before-write).
	for (int b = 0; b < geom_.banks; ++b) {
		for (auto& r : lddcs_[std::size_t(b)]) {
			if (b == write_bank) {
				if (r.wrap_band) {
					++counters_.wrap_band_reads;
				} else {
					++counters_.port_conflicts;
				}
			}
			if (bank_use_[std::size_t(b)]++ > 0) ++counters_.port_conflicts;
			lddc_out_[std::size_t(r.output_id)] = fifo_.read(std::int64_t(b) * s + r.row);
			++counters_.bank_reads;
		}
	}
	// Idle banks serve resident prefetch, one sample per job per cycle.
	for (auto& job : jobs_) {
		if (job.source != PrefetchSource::Resident || job.next >= job.first + job.count) continue;
		const std::int64_t addr = job.next % fifo_.geometry().total_depth();
		const auto bank = std::size_t(fifo_.bank_of(addr));
		if (bank_use_[bank] > 0 || int(bank) == write_bank) continue;
		bank_use_[bank] = 1;
		place_prefetched(job, job.next, fifo_.read(addr));
		++job.next;
		++job.done;
		++counters_.bank_reads;
		++counters_.prefetch_resident;
	}

	// Phase 2: write, fork streaming prefetch, multicast into RTRs.
	const std::int64_t w = fifo_.write_index();
	fifo_.write(incoming);
	++counters_.bank_writes;
	for (auto& job : jobs_) {
		if (job.source == PrefetchSource::Streaming && w >= job.first && w < job.first + job.count) {
			place_prefetched(job, w, incoming);
			++job.done;
			++counters_.prefetch_streaming;
		}
	}

	for (int b = 0; b < geom_.banks; ++b) {
		for (const auto& r : lddcs_[std::size_t(b)]) {
			const auto id = std::size_t(r.output_id);
			const auto& members = group_members_[id];
			if (members.empty()) {
				out_[id] = lddc_out_[id];
				continue;
			}
			for (int m : members) {
				auto& p = pecs_[std::size_t(m)];
				p.active().push(lddc_out_[id]);
				out_[std::size_t(m)] = p.active().at(p.offset);
				++counters_.multicasts;
			}
		}
	}

	// Pointer advance with ring handoff at the end of a bank.
	std::vector<std::pair<int, Reader>> moved;
	for (int b = 0; b < geom_.banks; ++b) {
		auto& list = lddcs_[std::size_t(b)];
		for (auto it = list.begin(); it != list.end();) {
			if (++it->row == s) {
				moved.push_back({(b + 1) % geom_.banks, {it->output_id, 0, it->wrap_band}});
				it = list.erase(it);
				++counters_.handoffs;
			} else {
				++it;
			}
		}
	}
	for (auto& [b, r] : moved) lddcs_[std::size_t(b)].push_back(r);
	return out_;
}

std::optional<std::int64_t> DelayDistributor::read_address(int output) const {
	for (int b = 0; b < geom_.banks; ++b) {
		for (const auto& r : lddcs_[std::size_t(b)]) {
			if (r.output_id == output) return std::int64_t(b) * geom_.bank_depth + r.row;
		}
	}
	return std::nullopt;
}

}  // namespace rfemu
