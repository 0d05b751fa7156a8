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

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rfemu/numerics.hpp"

namespace rfemu {

/// P single-port sub-banks of S samples, plus the dual-port RTR/PB depth.
struct FifoGeometry {
	int banks = 16;
	int bank_depth = 1024;
	int rtr_depth = 256;

	std::int64_t total_depth() const { return std::int64_t(banks) * bank_depth; }
	void validate() const;
};

/// Cycles a sample is held: round(d * f / c) - compute_latency.
/// Throws DomainError when the distance is below the emulable minimum.
std::int64_t buffer_delay(double distance_m, double sample_rate_hz, int compute_latency);

/// Smallest total delay (in samples) whose read pointer never shares the
/// write pointer's bank: one bank depth plus the compute latency.
std::int64_t min_emulable_delay(int bank_depth, int compute_latency);

/// Sub-banked sample store. Samples are written once at the write pointer and
/// never move; readers address them by absolute position.
class SimoFifo {
public:
	explicit SimoFifo(FifoGeometry g);

	const FifoGeometry& geometry() const { return geom_; }
	/// Absolute index of the next sample to be written (== samples written so far).
	std::int64_t write_index() const { return written_; }
	std::int64_t write_address() const { return written_ % geom_.total_depth(); }
	int bank_of(std::int64_t address) const { return int(address / geom_.bank_depth); }

	ComplexSample read(std::int64_t address) const { return mem_[std::size_t(address)]; }
	void write(ComplexSample x);

private:
	FifoGeometry geom_;
	std::vector<ComplexSample> mem_;
	std::int64_t written_ = 0;
};

struct OutputDelaySpec {
	int output_id = 0;
	std::int64_t buffer_delay = 0;
};

/// Initial read position of one LDDC-owned read pointer.
struct LddcConfig {
	int output_id = 0;  ///< ungrouped output or group header
	int bank = 0;
	int row = 0;
	std::int64_t buffer_delay = 0;
	/// Delay within one bank of the full depth: the read shares the write bank
	/// and relies on read-before-write ordering.
	bool wrap_band = false;
};

struct GroupMember {
	int output_id = 0;
	std::int64_t offset = 0;  ///< delay beyond the header, in samples
};

/// Outputs closer than one bank depth. Only the header owns a read pointer;
/// every member (the header included, at offset 0) reads its own RTR.
struct CollisionGroup {
	int header_id = 0;
	std::int64_t header_delay = 0;
	std::vector<GroupMember> members;
};

enum class PrefetchSource { Resident, Streaming };

/// Samples a member's PB must hold before its group goes live. Absolute FIFO
/// sample indices [first_index, first_index + count).
struct PrefetchRange {
	int output_id = 0;
	std::int64_t first_index = 0;
	std::int64_t count = 0;
	PrefetchSource source = PrefetchSource::Resident;
};

struct GddcPlan {
	std::int64_t activation_cycle = 0;
	std::int64_t lookahead_start = 0;  ///< cycle at which prefetching may begin
	std::vector<LddcConfig> lddcs;
	std::vector<CollisionGroup> groups;
	std::vector<int> blanked;  ///< outputs below one bank depth; they emit zeros
	std::vector<PrefetchRange> prefetch;
};

/// Partitions outputs into LDDC readers and collision groups for a scenario
/// that goes live at `activation_cycle`, and plans the PB prefetch that has to
/// run between `lookahead_start` and activation.
GddcPlan gddc_parse(std::span<const OutputDelaySpec> outputs, const FifoGeometry& geom, std::int64_t activation_cycle,
                    std::int64_t lookahead_start);

struct ControlpathCounters {
	std::int64_t bank_reads = 0;
	std::int64_t bank_writes = 0;
	std::int64_t port_conflicts = 0;
	std::int64_t wrap_band_reads = 0;
	std::int64_t handoffs = 0;
	std::int64_t multicasts = 0;
	std::int64_t prefetch_resident = 0;
	std::int64_t prefetch_streaming = 0;
	std::int64_t pb_underflows = 0;
	std::int64_t blanked_output_scenarios = 0;
	std::int64_t grouped_output_scenarios = 0;
	std::int64_t collision_groups = 0;

	ControlpathCounters& operator+=(const ControlpathCounters& o);
};

/// A node's whole sample-distribution path: SIMO-FIFO, one LDDC per bank,
/// and one PEC (RTR + PB pair) per output.
class DelayDistributor {
public:
	DelayDistributor(FifoGeometry g, int outputs);

	int outputs() const { return int(pecs_.size()); }
	std::int64_t cycle_index() const { return fifo_.write_index(); }

	/// Scenario boundary: swap every RTR/PB pair and load the LDDC read pointers.
	/// Must be called on the plan's activation cycle.
	void activate(const GddcPlan& plan);
	/// Look-ahead: clear the idle PBs and start filling them for `next`.
	void prepare(const GddcPlan& next);

	/// One clock: reads (LDDCs, then idle-bank prefetch), the write, PB forks,
	/// RTR multicast, and pointer advance. Returns one sample per output.
	std::span<const ComplexSample> cycle(ComplexSample incoming);

	/// Absolute read address of an LDDC-owned pointer, if `output` has one.
	std::optional<std::int64_t> read_address(int output) const;
	const ControlpathCounters& counters() const { return counters_; }
	const SimoFifo& fifo() const { return fifo_; }

private:
	struct Ring {
		std::vector<ComplexSample> data;
		std::size_t head = 0;
		void push(ComplexSample x);
		ComplexSample at(std::int64_t back) const;
		void place(std::int64_t back, ComplexSample x);
		void clear();
	};
	struct Pec {
		Ring store[2];
		int rtr = 0;  // index of the store acting as RTR
		std::int64_t offset = -1;  // -1: not grouped this scenario
		int header = -1;
		Ring& active() { return store[rtr]; }
		Ring& prefetch() { return store[rtr ^ 1]; }
	};
	struct Reader {
		int output_id;
		int row;
		bool wrap_band;
	};
	// One job per group and source: each sample is read once and multicast
	// into every member PB whose range covers it.
	struct PrefetchJob {
		std::vector<std::pair<int, std::int64_t>> members;  // output id, first index
		std::int64_t first;
		std::int64_t count;
		std::int64_t next;
		std::int64_t done = 0;
		PrefetchSource source;
		std::int64_t header_delay;
		std::int64_t activation;
	};

	void place_prefetched(const PrefetchJob& job, std::int64_t index, ComplexSample x);

	FifoGeometry geom_;
	SimoFifo fifo_;
	std::vector<std::vector<Reader>> lddcs_;
	std::vector<Pec> pecs_;
	std::vector<std::vector<int>> group_members_;  // indexed by header output id
	std::vector<PrefetchJob> jobs_;
	std::vector<ComplexSample> out_;
	std::vector<ComplexSample> lddc_out_;
	std::vector<int> bank_use_;
	ControlpathCounters counters_;
};

}  // namespace rfemu
