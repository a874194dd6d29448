/*
 * Copyright 2026 The Maskfed Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef MASKFED_ERRORS_H_
#define MASKFED_ERRORS_H_

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace maskfed {

// Root of every error raised by this library. Subclasses carry the
// structured fields callers and tests inspect.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Fixed-point encoding.
class RangeError : public Error {
 public:
  explicit RangeError(const std::string& what) : Error(what) {}
};
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(what) {}
};

class SchemaMismatch : public Error {
 public:
  explicit SchemaMismatch(const std::string& what) : Error(what) {}
};

// Masking / aggregation.
class MissingKey : public Error {
 public:
  explicit MissingKey(uint32_t peer)
      : Error("missing pair key for peer " + std::to_string(peer)),
        peer_(peer) {}
  uint32_t peer() const { return peer_; }

 private:
  uint32_t peer_;
};

class IncompleteRound : public Error {
 public:
  IncompleteRound(uint64_t round, std::vector<uint32_t> missing,
                  const std::string& detail = "");
  uint64_t round() const { return round_; }
  const std::vector<uint32_t>& missing() const { return missing_; }

 private:
  uint64_t round_;
  std::vector<uint32_t> missing_;
};

class RoundMismatch : public Error {
 public:
  explicit RoundMismatch(const std::string& what) : Error(what) {}
};

// Protocol.
class UnreachableClient : public Error {
 public:
  UnreachableClient(uint32_t id, const std::string& detail)
      : Error("client " + std::to_string(id) + " unreachable: " + detail),
        id_(id) {}
  uint32_t id() const { return id_; }

 private:
  uint32_t id_;
};

class KeyExchangeFailure : public Error {
 public:
  KeyExchangeFailure(uint32_t i, uint32_t j, const std::string& detail)
      : Error("key exchange (" + std::to_string(i) + ", " + std::to_string(j) +
              ") failed: " + detail),
        i_(i),
        j_(j) {}
  uint32_t initiator() const { return i_; }
  uint32_t responder() const { return j_; }

 private:
  uint32_t i_;
  uint32_t j_;
};

class DuplicateClientId : public Error {
 public:
  explicit DuplicateClientId(uint32_t id)
      : Error("duplicate client id " + std::to_string(id)), id_(id) {}
  uint32_t id() const { return id_; }

 private:
  uint32_t id_;
};

class ChannelNotConfidential : public Error {
 public:
  ChannelNotConfidential()
      : Error("refusing pair-key exchange over a non-confidential channel "
              "(set insecure mode to override)") {}
};

class Timeout : public Error {
 public:
  explicit Timeout(const std::string& what) : Error(what) {}
};

// Raised by the coordinator when too many consecutive rounds abort.
class SessionAborted : public Error {
 public:
  SessionAborted(uint64_t round, int failures, const std::string& last_error)
      : Error("session aborted at round " + std::to_string(round) + " after " +
              std::to_string(failures) + " failed attempts: " + last_error),
        round_(round) {}
  uint64_t round() const { return round_; }

 private:
  uint64_t round_;
};

// Transport.
class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(what) {}
};

class OversizePayload : public Error {
 public:
  explicit OversizePayload(uint64_t length)
      : Error("frame payload of " + std::to_string(length) +
              " bytes exceeds limit"),
        length_(length) {}
  uint64_t length() const { return length_; }

 private:
  uint64_t length_;
};

class UnknownMsgType : public Error {
 public:
  explicit UnknownMsgType(uint8_t type)
      : Error("unknown message type " + std::to_string(type)), type_(type) {}
  uint8_t type() const { return type_; }

 private:
  uint8_t type_;
};

class MalformedModel : public Error {
 public:
  MalformedModel(size_t offset, const std::string& reason)
      : Error("malformed model at offset " + std::to_string(offset) + ": " +
              reason),
        offset_(offset) {}
  size_t offset() const { return offset_; }

 private:
  size_t offset_;
};

// Peer sent a 0x7F frame.
class RemoteError : public Error {
 public:
  explicit RemoteError(const std::string& what) : Error("peer error: " + what) {}
};

// Trainer.
class EmptyDataset : public Error {
 public:
  EmptyDataset() : Error("training dataset is empty") {}
};
class DivergenceError : public Error {
 public:
  explicit DivergenceError(const std::string& what) : Error(what) {}
};

// Data distribution.
class TooFewRows : public Error {
 public:
  TooFewRows(size_t rows, size_t clients)
      : Error(std::to_string(rows) + " rows cannot be split across " +
              std::to_string(clients) + " clients") {}
};
class UncoveredValue : public Error {
 public:
  explicit UncoveredValue(double v)
      : Error("attribute value " + std::to_string(v) + " falls in no band"),
        value_(v) {}
  double value() const { return value_; }

 private:
  double value_;
};
class EmptyClientPartition : public Error {
 public:
  explicit EmptyClientPartition(uint32_t id)
      : Error("client " + std::to_string(id) + " received no rows"), id_(id) {}
  uint32_t id() const { return id_; }

 private:
  uint32_t id_;
};
class EmptyPool : public Error {
 public:
  enum class Side { kTrain, kTest };
  explicit EmptyPool(Side side)
      : Error(std::string("empty ") +
              (side == Side::kTrain ? "train" : "test") + " pool"),
        side_(side) {}
  Side side() const { return side_; }

 private:
  Side side_;
};

// Metrics.
class DegenerateLabels : public Error {
 public:
  DegenerateLabels() : Error("ROC requires both positive and negative labels") {}
};

}  // namespace maskfed

#endif  // MASKFED_ERRORS_H_
