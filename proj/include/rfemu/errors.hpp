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

#include <stdexcept>
#include <string>

namespace rfemu {

/// Invalid or inconsistent configuration (scene, preset, packet contents).
class ConfigError : public std::runtime_error {
public:
	using std::runtime_error::runtime_error;
};

/// A physical quantity outside the range the model can represent.
class DomainError : public std::runtime_error {
public:
	using std::runtime_error::runtime_error;
};

/// Malformed serialized input. `offset` is the byte position of the fault.
class ParseError : public std::runtime_error {
public:
	ParseError(const std::string& what, std::size_t offset)
	    : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
	std::size_t offset() const { return offset_; }

private:
	std::size_t offset_;
};

/// Scenario programming used out of order (e.g. a packet staged after its boundary).
class ContractViolation : public std::runtime_error {
public:
	using std::runtime_error::runtime_error;
};

}  // namespace rfemu
