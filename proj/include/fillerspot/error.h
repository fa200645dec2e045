// Copyright (c) 2026 The FillerSpot Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FILLERSPOT_ERROR_H_
#define FILLERSPOT_ERROR_H_

#include <stdexcept>
#include <string>

namespace fillerspot {

// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration (specs, fractions, architecture, loss factors).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed input data handed to a pure function (short waveform, bad shape).
class InputError : public Error {
 public:
  using Error::Error;
};

// Missing or unreadable files during corpus ingestion.
class IngestionError : public Error {
 public:
  using Error::Error;
};

// A data-model invariant does not hold (event ordering, durations, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

class EncodingError : public Error {
 public:
  using Error::Error;
};

class PromotionError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf encountered where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Checkpoint and configuration disagree (channel count, frontend, version).
class CompatibilityError : public Error {
 public:
  using Error::Error;
};

}  // namespace fillerspot

#endif  // FILLERSPOT_ERROR_H_
