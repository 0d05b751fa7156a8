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

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rfemu/controlpath.hpp"
#include "rfemu/datapath.hpp"
#include "rfemu/golden.hpp"
#include "rfemu/numerics.hpp"

namespace rfemu {

using Vec3 = std::array<double, 3>;

struct Quaternion {
	double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

	Quaternion operator*(const Quaternion& o) const;
	Quaternion conjugate() const { return {w, -x, -y, -z}; }
	Vec3 rotate(const Vec3& v) const;
	Quaternion normalized() const;
};

/// Hardware configuration of every node in a run.
struct Preset {
	std::string name;
	FifoGeometry geometry;
	int compute_latency = 124;
	double sample_rate_hz = 518e6;

	std::int64_t max_buffer_delay() const { return geometry.total_depth(); }
	std::int64_t min_total_delay() const { return min_emulable_delay(geometry.bank_depth, compute_latency); }
};

/// Named presets: asic4, fpga6, fpga9, sim16.
const Preset& preset_by_name(const std::string& name);
std::span<const Preset> all_presets();

/// Transmitter waveform: a DRFG, optionally keyed so only the first
/// `burst_cycles` of every `pri_cycles` window emit (pri 0 = free running).
struct TxWaveform {
	DrfgConfig drfg;
	std::int64_t pri_cycles = 0;
	std::int64_t burst_cycles = 0;

	ComplexSample sample(std::int64_t cycle) const;
};

/// Linear chirp from -sweep/2 to +sweep/2 (fractions of the sample rate), unit
/// amplitude, rounded to F16.
std::vector<ComplexSample> linear_chirp(int length = 512, double sweep_fraction = 0.25);

/// Pulsed chirp on a 2048-slot DRFG with a 25% duty cycle.
TxWaveform default_waveform();

struct SceneObject {
	std::string id;
	bool transmits = false;
	bool reflects = false;
	bool receives = false;
	Vec3 position{};
	Vec3 velocity{};
	Vec3 acceleration{};
	Quaternion orientation;
	Vec3 angular_rate{};  ///< rad/s, world frame
	RcsProfile rcs;
	AntennaPattern antenna;
	std::optional<TxWaveform> waveform;
};

struct Scene {
	std::vector<SceneObject> objects;
	double carrier_hz = 10e9;
	double sample_rate_hz = 0.0;  ///< 0: take the preset's rate
	std::int64_t scenario_length = 0;
	double frame_interval_s = 1e-3;
	PathLossModel path_loss;
	bool inter_object = true;  ///< allow passive-to-passive links
	bool fdc = true;           ///< fractional delay correction on every link

	double rate(const Preset& p) const { return sample_rate_hz > 0 ? sample_rate_hz : p.sample_rate_hz; }
	void validate() const;
};

/// Directed links of the communication graph, ordered by (src, dst).
std::vector<std::pair<int, int>> scene_links(const Scene& scene);

Scene parse_scene(const std::string& json_text);
Scene load_scene(const std::filesystem::path& path);

struct ObjectState {
	Vec3 position{};
	Vec3 velocity{};
	Quaternion orientation;
};

struct Frame {
	double timestamp = 0.0;
	std::vector<ObjectState> objects;
};

std::vector<Frame> frame_generate(const Scene& scene, int n_frames);

struct LinkEntry {
	std::uint16_t src = 0;
	std::uint16_t dst = 0;
	std::uint32_t buffer_delay = 0;
	std::uint16_t mu_q16 = 0;
	FdcTaps fdc_taps = FdcTaps::passthrough();
	F16 alpha;
	F16 beta_rho;
	F16 g_t;
	F16 g_r;
	double doppler_hz = 0.0;

	double mu() const { return double(mu_q16) / 65536.0; }
	friend bool operator==(const LinkEntry&, const LinkEntry&) = default;
};

struct ScenarioConfigPacket {
	std::uint32_t scenario_id = 0;
	std::vector<LinkEntry> links;
	friend bool operator==(const ScenarioConfigPacket&, const ScenarioConfigPacket&) = default;
};

/// Unquantized parameters of one link, kept next to the packet for the
/// reference model.
struct LinkSolution {
	int src = 0;
	int dst = 0;
	double distance_m = 0.0;
	double delay_samples = 0.0;
	double doppler_hz = 0.0;
	double alpha = 0.0;
	double beta_rho = 0.0;
	double g_t = 0.0;
	double g_r = 0.0;
	SphericalAngle theta_in;
	SphericalAngle theta_out;
};

struct FrameSolution {
	ScenarioConfigPacket scp;
	std::vector<LinkSolution> exact;
};

struct SolveOptions {
	/// Throw on links below the minimum emulable range; otherwise encode them
	/// and let the controlpath blank them.
	bool strict = true;
};

FrameSolution solve_frame(const Frame& frame, const Scene& scene, const Preset& preset, std::uint32_t scenario_id,
                          const SolveOptions& opts = {});

/// Frames -> packets for a whole run.
std::vector<FrameSolution> compile_scene(const Scene& scene, const Preset& preset, int n_frames,
                                         const SolveOptions& opts = {});

inline constexpr std::uint16_t kScpVersion = 1;
inline constexpr std::size_t kScpHeaderBytes = 12;
inline constexpr std::size_t kScpLinkBytes = 34;

std::vector<std::uint8_t> scp_encode(const ScenarioConfigPacket& scp);
/// Decodes one packet starting at `offset`; advances `offset` past it.
ScenarioConfigPacket scp_decode(std::span<const std::uint8_t> bytes, std::size_t& offset);
ScenarioConfigPacket scp_decode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> scp_encode_all(std::span<const ScenarioConfigPacket> scps);
std::vector<ScenarioConfigPacket> scp_decode_all(std::span<const std::uint8_t> bytes);

/// Double-buffered packet register. A packet must be staged at least
/// `lookahead` cycles before the boundary it applies at; it then takes effect
/// atomically on that boundary cycle.
class ScenarioUpdateUnit {
public:
	explicit ScenarioUpdateUnit(std::int64_t lookahead = 0) : lookahead_(lookahead) {}

	void stage(const ScenarioConfigPacket& scp, std::int64_t now, std::int64_t boundary);
	/// Returns the packet that becomes live on `cycle`, if any.
	std::optional<ScenarioConfigPacket> on_cycle(std::int64_t cycle);
	const std::optional<ScenarioConfigPacket>& staged() const { return staged_; }

private:
	std::int64_t lookahead_;
	std::optional<ScenarioConfigPacket> staged_;
	std::int64_t boundary_ = -1;
};

}  // namespace rfemu
