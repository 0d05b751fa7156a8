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

#include "rfemu/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

#include "json.hpp"

#include "rfemu/errors.hpp"

namespace rfemu {

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

Quaternion Quaternion::operator*(const Quaternion& o) const {
	return {w * o.w - x * o.x - y * o.y - z * o.z, w * o.x + x * o.w + y * o.z - z * o.y,
	        w * o.y - x * o.z + y * o.w + z * o.x, w * o.z + x * o.y - y * o.x + z * o.w};
}

Vec3 Quaternion::rotate(const Vec3& v) const {
	const Quaternion p{0.0, v[0], v[1], v[2]};
	const Quaternion r = (*this) * p * conjugate();
	return {r.x, r.y, r.z};
}

Quaternion Quaternion::normalized() const {
	const double n = std::sqrt(w * w + x * x + y * y + z * z);
	if (!(n > 0)) throw ConfigError("orientation quaternion has zero norm");
	return {w / n, x / n, y / n, z / n};
}

namespace {

Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

SphericalAngle body_angle(const Quaternion& q, const Vec3& world_dir) {
	const Vec3 b = q.conjugate().rotate(world_dir);
	double az = std::atan2(b[1], b[0]);
	if (az >= std::numbers::pi) az -= 2.0 * std::numbers::pi;
	const double el = std::asin(std::clamp(b[2] / std::max(norm(b), 1e-300), -1.0, 1.0));
	return {az, el};
}

}  // namespace

// ---------------------------------------------------------------------------
// Presets and waveforms
// ---------------------------------------------------------------------------

namespace {
const std::vector<Preset>& preset_table() {
	static const std::vector<Preset> presets = {
	    {"asic4", {16, 1024, 256}, 124, 518e6},
	    {"fpga6", {20, 1024, 1024}, 124, 215e6},
	    {"fpga9", {40, 512, 512}, 124, 215e6},
	    {"sim16", {24, 1024, 1024}, 124, 2.5e9},
	};
	return presets;
}
}  // namespace

std::span<const Preset> all_presets() { return preset_table(); }

const Preset& preset_by_name(const std::string& name) {
	for (const auto& p : preset_table()) {
		if (p.name == name) return p;
	}
	throw ConfigError("unknown preset '" + name + "' (known: asic4, fpga6, fpga9, sim16)");
}

ComplexSample TxWaveform::sample(std::int64_t cycle) const {
	if (pri_cycles <= 0) return drfg_step(drfg, cycle);
	const std::int64_t phase = cycle % pri_cycles;
	return phase < burst_cycles ? drfg_step(drfg, phase) : kZeroSample;
}

std::vector<ComplexSample> linear_chirp(int length, double sweep_fraction) {
	std::vector<ComplexSample> out(std::size_t(std::max(length, 0)));
	const double f0 = -0.5 * sweep_fraction;
	const double k = sweep_fraction / double(length);
	for (int n = 0; n < length; ++n) {
		const double turns = f0 * n + 0.5 * k * double(n) * double(n);
		out[std::size_t(n)] = ComplexSample::quantize(std::polar(1.0, 2.0 * std::numbers::pi * turns));
	}
	return out;
}

TxWaveform default_waveform() {
	TxWaveform w;
	w.drfg.period = 2048;
	w.drfg.duty_cycle = 0.25;
	w.drfg.iq_pattern = linear_chirp(512, 0.25);
	return w;
}

// ---------------------------------------------------------------------------
// Scene
// ---------------------------------------------------------------------------

void Scene::validate() const {
	const bool any_tx = std::any_of(objects.begin(), objects.end(), [](const auto& o) { return o.transmits; });
	const bool any_rx = std::any_of(objects.begin(), objects.end(), [](const auto& o) { return o.receives; });
	if (!any_tx) throw ConfigError("scene needs at least one transmitter");
	if (!any_rx) throw ConfigError("scene needs at least one receiver");
	if (objects.size() > 0xFFFF) throw ConfigError("too many objects");
	for (const auto& o : objects) {
		if (o.transmits && o.reflects) {
			throw ConfigError("object '" + o.id + "' cannot both transmit and reflect: a node buffers one stream");
		}
		if (o.transmits) {
			if (!o.waveform) throw ConfigError("transmitter '" + o.id + "' has no waveform");
			o.waveform->drfg.validate();
		}
		if (o.antenna.g_t.min_value() < 0 || o.antenna.g_r.min_value() < 0) {
			throw ConfigError("object '" + o.id + "' has a negative antenna gain");
		}
	}
	if (scenario_length <= 0) throw ConfigError("scenario_length must be positive");
	if (scenario_length % DopplerFsm::kUpdatePeriod != 0) {
		throw ConfigError("scenario_length must be a multiple of the 256-cycle Doppler update period");
	}
	if (!(frame_interval_s > 0)) throw ConfigError("frame interval must be positive");
}

std::vector<std::pair<int, int>> scene_links(const Scene& scene) {
	std::vector<std::pair<int, int>> links;
	const int n = int(scene.objects.size());
	for (int i = 0; i < n; ++i) {
		const auto& a = scene.objects[std::size_t(i)];
		if (!a.transmits && !a.reflects) continue;
		for (int j = 0; j < n; ++j) {
			const auto& b = scene.objects[std::size_t(j)];
			if (i == j || (!b.reflects && !b.receives)) continue;
			if (!scene.inter_object && a.reflects && b.reflects) continue;
			links.emplace_back(i, j);
		}
	}
	return links;
}

namespace {

using nlohmann::json;

Vec3 vec3(const json& j, const char* key, Vec3 def = {}) {
	if (!j.contains(key)) return def;
	const auto& a = j.at(key);
	if (!a.is_array() || a.size() != 3) throw ConfigError(std::string("'") + key + "' must be a 3-vector");
	return {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
}

AngleTable table_from(const json& v, const json& tables) {
	if (v.is_number()) return AngleTable(v.get<double>());
	if (v.is_string()) {
		const auto name = v.get<std::string>();
		if (!tables.contains(name)) throw ConfigError("unknown table '" + name + "'");
		return table_from(tables.at(name), tables);
	}
	if (v.is_object()) {
		auto deg = [](const json& a) {
			std::vector<double> r;
			for (const auto& x : a) r.push_back(x.get<double>() * std::numbers::pi / 180.0);
			return r;
		};
		std::vector<double> el = v.contains("elevation_deg") ? deg(v.at("elevation_deg")) : std::vector<double>{0.0};
		return AngleTable(deg(v.at("azimuth_deg")), std::move(el), v.at("values").get<std::vector<double>>());
	}
	throw ConfigError("gain table must be a number, a table name, or a table object");
}

TxWaveform waveform_from(const json& w) {
	TxWaveform out;
	const auto type = w.value("type", std::string("chirp"));
	out.drfg.period = w.value("period", 2048);
	out.drfg.duty_cycle = w.value("duty_cycle", 0.25);
	if (type == "chirp") {
		out.drfg.iq_pattern = linear_chirp(w.value("length", out.drfg.active_slots()), w.value("sweep_fraction", 0.25));
	} else if (type == "pattern") {
		for (const auto& s : w.at("iq")) out.drfg.iq_pattern.push_back(ComplexSample::quantize({s[0], s[1]}));
	} else {
		throw ConfigError("unknown waveform type '" + type + "'");
	}
	out.pri_cycles = w.value("pri_cycles", std::int64_t(0));
	out.burst_cycles = w.value("burst_cycles", std::int64_t(out.drfg.period));
	return out;
}

}  // namespace

Scene parse_scene(const std::string& text) {
	json j;
	try {
		j = json::parse(text);
	} catch (const json::parse_error& e) {
		throw ParseError(std::string("scene is not valid JSON: ") + e.what(), e.byte);
	}
	try {
		Scene s;
		s.sample_rate_hz = j.value("sample_rate_hz", 0.0);
		s.carrier_hz = j.value("carrier_hz", 10e9);
		s.scenario_length = j.value("scenario_length", std::int64_t(0));
		s.frame_interval_s = j.value("frame_interval_s", 1e-3);
		s.inter_object = j.value("inter_object", true);
		s.fdc = j.value("fdc", true);
		if (j.contains("path_loss")) {
			const auto& p = j.at("path_loss");
			s.path_loss.exponent = p.value("exponent", 1.0);
			s.path_loss.reference_distance = p.value("reference_distance_m", 1.0);
			s.path_loss.reference_gain = p.value("reference_gain", 1.0);
		}
		const json tables = j.value("tables", json::object());
		for (const auto& o : j.at("objects")) {
			SceneObject obj;
			obj.id = o.at("id").get<std::string>();
			for (const auto& r : o.at("roles")) {
				const auto role = r.get<std::string>();
				if (role == "tx") obj.transmits = true;
				else if (role == "reflect") obj.reflects = true;
				else if (role == "rx") obj.receives = true;
				else throw ConfigError("object '" + obj.id + "': unknown role '" + role + "'");
			}
			obj.position = vec3(o, "position");
			obj.velocity = vec3(o, "velocity");
			obj.acceleration = vec3(o, "acceleration");
			obj.angular_rate = vec3(o, "angular_rate");
			if (o.contains("orientation")) {
				const auto& q = o.at("orientation");
				obj.orientation = Quaternion{q[0], q[1], q[2], q[3]}.normalized();
			}
			obj.rcs.alpha = table_from(o.value("alpha", json(1.0)), tables);
			obj.rcs.beta = table_from(o.value("beta", json(1.0)), tables);
			obj.antenna.g_t = table_from(o.value("g_t", json(1.0)), tables);
			obj.antenna.g_r = table_from(o.value("g_r", json(1.0)), tables);
			if (o.contains("waveform")) obj.waveform = waveform_from(o.at("waveform"));
			else if (obj.transmits) obj.waveform = default_waveform();
			s.objects.push_back(std::move(obj));
		}
		return s;
	} catch (const json::exception& e) {
		throw ConfigError(std::string("scene schema error: ") + e.what());
	}
}

Scene load_scene(const std::filesystem::path& path) {
	std::ifstream in(path);
	if (!in) throw ConfigError("cannot open scene file " + path.string());
	std::stringstream ss;
	ss << in.rdbuf();
	return parse_scene(ss.str());
}

// ---------------------------------------------------------------------------
// Frames and parameter solving
// ---------------------------------------------------------------------------

std::vector<Frame> frame_generate(const Scene& scene, int n_frames) {
	std::vector<Frame> frames;
	frames.reserve(std::size_t(std::max(n_frames, 0)));
	for (int n = 0; n < n_frames; ++n) {
		const double t = double(n) * scene.frame_interval_s;
		Frame f;
		f.timestamp = t;
		for (const auto& o : scene.objects) {
			ObjectState st;
			for (int k = 0; k < 3; ++k) {
				st.position[k] = o.position[k] + o.velocity[k] * t + 0.5 * o.acceleration[k] * t * t;
				st.velocity[k] = o.velocity[k] + o.acceleration[k] * t;
			}
			// Constant world-frame rate: q(t) = exp(w t / 2) q0.
			const double rate = norm(o.angular_rate);
			Quaternion dq;
			if (rate > 0) {
				const double half = 0.5 * rate * t;
				const double s = std::sin(half) / rate;
				dq = {std::cos(half), o.angular_rate[0] * s, o.angular_rate[1] * s, o.angular_rate[2] * s};
			}
			st.orientation = (dq * o.orientation).normalized();
			f.objects.push_back(st);
		}
		frames.push_back(std::move(f));
	}
	return frames;
}

FrameSolution solve_frame(const Frame& frame, const Scene& scene, const Preset& preset, std::uint32_t scenario_id,
                          const SolveOptions& opts) {
	if (frame.objects.size() != scene.objects.size()) throw ConfigError("frame does not match scene objects");
	const double fs = scene.rate(preset);
	const std::int64_t max_buffer = preset.max_buffer_delay();
	FrameSolution out;
	out.scp.scenario_id = scenario_id;
	for (const auto& [i, j] : scene_links(scene)) {
		const auto& a = scene.objects[std::size_t(i)];
		const auto& b = scene.objects[std::size_t(j)];
		const auto& sa = frame.objects[std::size_t(i)];
		const auto& sb = frame.objects[std::size_t(j)];
		const Vec3 d_vec = sub(sb.position, sa.position);
		const double d = norm(d_vec);
		for (double x : sa.position) {
			if (!std::isfinite(x)) throw DomainError("object '" + a.id + "' has non-finite kinematics");
		}
		if (!(d > 0)) throw DomainError("objects '" + a.id + "' and '" + b.id + "' coincide");
		const Vec3 u{d_vec[0] / d, d_vec[1] / d, d_vec[2] / d};

		LinkSolution ls;
		ls.src = i;
		ls.dst = j;
		ls.distance_m = d;
		double total = d * fs / kSpeedOfLight;
		if (std::fabs(total - std::round(total)) < 1e-6) total = std::round(total);
		ls.delay_samples = total;
		ls.theta_out = body_angle(sa.orientation, u);
		ls.theta_in = body_angle(sb.orientation, {-u[0], -u[1], -u[2]});
		const double closing = -dot(u, sub(sb.velocity, sa.velocity));
		ls.doppler_hz = scene.carrier_hz * closing / kSpeedOfLight;
		const double rho = scene.path_loss.at_distance(d);
		ls.alpha = b.reflects ? b.rcs.alpha(ls.theta_in) : 0.0;
		ls.g_r = b.receives ? b.antenna.g_r(ls.theta_in) : 0.0;
		ls.beta_rho = a.reflects ? a.rcs.beta(ls.theta_out) * rho : 0.0;
		ls.g_t = a.transmits ? a.antenna.g_t(ls.theta_out) * rho : 0.0;

		LinkEntry e;
		e.src = std::uint16_t(i);
		e.dst = std::uint16_t(j);
		std::int64_t whole;
		if (scene.fdc) {
			whole = std::int64_t(std::floor(total));
			auto q = std::llround((total - double(whole)) * 65536.0);
			if (q == 65536) {
				++whole;
				q = 0;
			}
			e.mu_q16 = std::uint16_t(q);
			e.fdc_taps = FdcTaps::for_delay(e.mu());
		} else {
			whole = std::int64_t(std::llround(total));
			e.fdc_taps = FdcTaps::passthrough();
		}
		const std::int64_t buffer = whole - preset.compute_latency;
		if (buffer < preset.geometry.bank_depth && opts.strict) {
			throw DomainError("link '" + a.id + "' -> '" + b.id + "': " + std::to_string(d) +
			                  " m is below the minimum emulable range (" + std::to_string(preset.min_total_delay()) +
			                  " samples)");
		}
		if (buffer > max_buffer) {
			throw ConfigError("link '" + a.id + "' -> '" + b.id + "': buffer delay " + std::to_string(buffer) +
			                  " exceeds maximum emulation range of " + std::to_string(max_buffer) + " samples");
		}
		e.buffer_delay = std::uint32_t(std::max<std::int64_t>(buffer, 0));
		e.alpha = quantize_f16(ls.alpha);
		// The rounded taps miss unit DC gain by up to ~1.5%; the lumped gains
		// carry the correction so amplitudes stay calibrated per link.
		const double norm = 1.0 / e.fdc_taps.dc_gain();
		e.beta_rho = quantize_f16(ls.beta_rho * norm);
		e.g_t = quantize_f16(ls.g_t * norm);
		e.g_r = quantize_f16(ls.g_r);
		e.doppler_hz = ls.doppler_hz;
		out.scp.links.push_back(e);
		out.exact.push_back(ls);
	}
	return out;
}

std::vector<FrameSolution> compile_scene(const Scene& scene, const Preset& preset, int n_frames,
                                         const SolveOptions& opts) {
	scene.validate();
	std::vector<FrameSolution> out;
	const auto frames = frame_generate(scene, n_frames);
	for (std::size_t k = 0; k < frames.size(); ++k) out.push_back(solve_frame(frames[k], scene, preset, std::uint32_t(k), opts));
	return out;
}

// ---------------------------------------------------------------------------
// Packet encoding
// ---------------------------------------------------------------------------

namespace {

class Writer {
public:
	explicit Writer(std::vector<std::uint8_t>& out) : out_(out) {}
	void u16(std::uint16_t v) {
		out_.push_back(std::uint8_t(v));
		out_.push_back(std::uint8_t(v >> 8));
	}
	void u32(std::uint32_t v) {
		for (int i = 0; i < 4; ++i) out_.push_back(std::uint8_t(v >> (8 * i)));
	}
	void f64(double v) {
		std::uint64_t b;
		std::memcpy(&b, &v, sizeof b);
		for (int i = 0; i < 8; ++i) out_.push_back(std::uint8_t(b >> (8 * i)));
	}

private:
	std::vector<std::uint8_t>& out_;
};

class Reader {
public:
	Reader(std::span<const std::uint8_t> in, std::size_t& pos) : in_(in), pos_(pos) {}
	void need(std::size_t n, const char* what) const {
		if (pos_ + n > in_.size()) throw ParseError(std::string("truncated packet: missing ") + what, pos_);
	}
	std::uint16_t u16() {
		need(2, "u16");
		std::uint16_t v = std::uint16_t(in_[pos_] | (in_[pos_ + 1] << 8));
		pos_ += 2;
		return v;
	}
	std::uint32_t u32() {
		need(4, "u32");
		std::uint32_t v = 0;
		for (int i = 0; i < 4; ++i) v |= std::uint32_t(in_[pos_ + std::size_t(i)]) << (8 * i);
		pos_ += 4;
		return v;
	}
	double f64() {
		need(8, "f64");
		std::uint64_t b = 0;
		for (int i = 0; i < 8; ++i) b |= std::uint64_t(in_[pos_ + std::size_t(i)]) << (8 * i);
		pos_ += 8;
		double v;
		std::memcpy(&v, &b, sizeof v);
		return v;
	}
	std::size_t pos() const { return pos_; }

private:
	std::span<const std::uint8_t> in_;
	std::size_t& pos_;
};

}  // namespace

std::vector<std::uint8_t> scp_encode(const ScenarioConfigPacket& scp) {
	if (scp.links.size() > 0xFFFF) throw ConfigError("too many links for one packet");
	std::vector<std::uint8_t> out;
	out.reserve(kScpHeaderBytes + kScpLinkBytes * scp.links.size());
	out.insert(out.end(), {'D', 'P', 'C', 'M'});
	Writer w(out);
	w.u16(kScpVersion);
	w.u32(scp.scenario_id);
	w.u16(std::uint16_t(scp.links.size()));
	for (const auto& l : scp.links) {
		w.u16(l.src);
		w.u16(l.dst);
		w.u32(l.buffer_delay);
		w.u16(l.mu_q16);
		for (const auto& t : l.fdc_taps.taps) w.u16(t.bits());
		w.u16(l.alpha.bits());
		w.u16(l.beta_rho.bits());
		w.u16(l.g_t.bits());
		w.u16(l.g_r.bits());
		w.f64(l.doppler_hz);
	}
	return out;
}

ScenarioConfigPacket scp_decode(std::span<const std::uint8_t> bytes, std::size_t& offset) {
	const std::size_t start = offset;
	if (offset + 4 > bytes.size()) throw ParseError("truncated packet: missing magic", offset);
	if (std::memcmp(bytes.data() + offset, "DPCM", 4) != 0) throw ParseError("bad packet magic", offset);
	offset += 4;
	Reader r(bytes, offset);
	const std::size_t vpos = r.pos();
	const std::uint16_t version = r.u16();
	if (version != kScpVersion) throw ParseError("unsupported packet version " + std::to_string(version), vpos);
	ScenarioConfigPacket scp;
	scp.scenario_id = r.u32();
	const std::uint16_t n = r.u16();
	r.need(kScpLinkBytes * n, "link entries");
	for (std::uint16_t i = 0; i < n; ++i) {
		LinkEntry l;
		l.src = r.u16();
		l.dst = r.u16();
		l.buffer_delay = r.u32();
		l.mu_q16 = r.u16();
		for (auto& t : l.fdc_taps.taps) {
			const std::size_t tpos = r.pos();
			const std::uint16_t b = r.u16();
			if (b >> 10) throw ParseError("FDC tap uses bits above the 10-bit format", tpos);
			t = MiniF10::from_bits(b);
		}
		l.alpha = F16::from_bits(r.u16());
		l.beta_rho = F16::from_bits(r.u16());
		l.g_t = F16::from_bits(r.u16());
		l.g_r = F16::from_bits(r.u16());
		l.doppler_hz = r.f64();
		scp.links.push_back(l);
	}
	(void)start;
	return scp;
}

ScenarioConfigPacket scp_decode(std::span<const std::uint8_t> bytes) {
	std::size_t off = 0;
	auto scp = scp_decode(bytes, off);
	if (off != bytes.size()) throw ParseError("trailing bytes after packet", off);
	return scp;
}

std::vector<std::uint8_t> scp_encode_all(std::span<const ScenarioConfigPacket> scps) {
	std::vector<std::uint8_t> out;
	for (const auto& s : scps) {
		auto b = scp_encode(s);
		out.insert(out.end(), b.begin(), b.end());
	}
	return out;
}

std::vector<ScenarioConfigPacket> scp_decode_all(std::span<const std::uint8_t> bytes) {
	std::vector<ScenarioConfigPacket> out;
	std::size_t off = 0;
	while (off < bytes.size()) out.push_back(scp_decode(bytes, off));
	return out;
}

// ---------------------------------------------------------------------------
// Scenario update double buffer
// ---------------------------------------------------------------------------

void ScenarioUpdateUnit::stage(const ScenarioConfigPacket& scp, std::int64_t now, std::int64_t boundary) {
	if (now > boundary - lookahead_) {
		throw ContractViolation("packet " + std::to_string(scp.scenario_id) + " staged at cycle " + std::to_string(now) +
		                        ", after the deadline " + std::to_string(boundary - lookahead_) +
		                        " for the boundary at cycle " + std::to_string(boundary));
	}
	if (staged_ && boundary_ != boundary) {
		throw ContractViolation("a packet is already staged for the boundary at cycle " + std::to_string(boundary_));
	}
	staged_ = scp;
	boundary_ = boundary;
}

std::optional<ScenarioConfigPacket> ScenarioUpdateUnit::on_cycle(std::int64_t cycle) {
	if (!staged_ || cycle != boundary_) {
		if (staged_ && cycle > boundary_) throw ContractViolation("staged packet missed its boundary");
		return std::nullopt;
	}
	auto out = std::move(staged_);
	staged_.reset();
	return out;
}

}  // namespace rfemu
