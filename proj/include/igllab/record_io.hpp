// record_io.hpp
// Line-delimited JSON record files for off-policy replay and for capturing
// on-policy runs. One object per line:
//
//   {"schema_version":1,
//    "context":{"user_id":3,"dim":10,"features":[[3,1.0]]},
//    "actions":[{"action_id":0,"dim":10,"features":[[0,1.0]]}, ...],
//    "chosen_index":2,"behavior_probs":[0.01,...],"feedback_signal":4,
//    "latent_reward":1}
//
// latent_reward is omitted when unknown. Reals are written in the shortest
// form that parses back to the same double.
#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "igllab/core.hpp"

namespace igllab {

inline constexpr int kRecordSchemaVersion = 1;

class SinkError : public Error {
 public:
  using Error::Error;
};

/// A line that is not a well-formed record object.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("ParseError at line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A well-formed record that violates a protocol invariant.
class RecordValidationError : public ValidationError {
 public:
  RecordValidationError(std::size_t line, const ValidationError& cause)
      : ValidationError(cause.invariant(),
                        "line " + std::to_string(line) + ": " + std::string(cause.what())),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

namespace record_json {

using nlohmann::json;

inline json features_to_json(const FeatureVector& fv) {
  json arr = json::array();
  for (const auto& [i, v] : fv.entries()) arr.push_back(json::array({i, v}));
  return arr;
}

inline json to_json(const InteractionRecord& rec) {
  json j;
  j["schema_version"] = kRecordSchemaVersion;
  j["context"] = {{"user_id", rec.context.user_id},
                  {"dim", rec.context.features.dimension()},
                  {"features", features_to_json(rec.context.features)}};
  json actions = json::array();
  for (const auto& a : rec.action_set.actions)
    actions.push_back({{"action_id", a.action_id},
                       {"dim", a.features.dimension()},
                       {"features", features_to_json(a.features)}});
  j["actions"] = std::move(actions);
  j["chosen_index"] = rec.chosen_index;
  j["behavior_probs"] = rec.behavior_probs.probs;
  j["feedback_signal"] = rec.feedback.signal_id;
  if (rec.latent_reward) j["latent_reward"] = value_of(*rec.latent_reward);
  return j;
}

// Field access that reports the offending key.
inline const json& field(const json& obj, const char* key) {
  if (!obj.is_object()) throw std::invalid_argument("expected an object holding '" + std::string(key) + "'");
  auto it = obj.find(key);
  if (it == obj.end()) throw std::invalid_argument("missing key '" + std::string(key) + "'");
  return *it;
}

inline std::int64_t as_int(const json& v, const char* key) {
  if (!v.is_number_integer()) throw std::invalid_argument("'" + std::string(key) + "' must be an integer");
  return v.get<std::int64_t>();
}

inline std::uint32_t as_index(const json& v, const char* key) {
  const auto i = as_int(v, key);
  if (i < 0 || i > static_cast<std::int64_t>(UINT32_MAX))
    throw std::invalid_argument("'" + std::string(key) + "' must be a non-negative 32-bit integer");
  return static_cast<std::uint32_t>(i);
}

inline double as_real(const json& v, const char* key) {
  if (!v.is_number()) throw std::invalid_argument("'" + std::string(key) + "' must be a number");
  return v.get<double>();
}

inline FeatureVector features_from_json(const json& obj) {
  const auto dim = as_index(field(obj, "dim"), "dim");
  const json& arr = field(obj, "features");
  if (!arr.is_array()) throw std::invalid_argument("'features' must be an array");
  std::vector<FeatureVector::Entry> entries;
  for (const auto& pair : arr) {
    if (!pair.is_array() || pair.size() != 2)
      throw std::invalid_argument("feature entries must be [index, value] pairs");
    entries.emplace_back(as_index(pair[0], "feature index"), as_real(pair[1], "feature value"));
  }
  return FeatureVector(dim, std::move(entries));
}

/// Structural decoding; std::invalid_argument for shape problems,
/// ValidationError for invariant violations caught while building values.
inline InteractionRecord from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("record must be a JSON object");
  const auto version = as_int(field(j, "schema_version"), "schema_version");
  if (version != kRecordSchemaVersion)
    throw std::invalid_argument("unsupported schema_version " + std::to_string(version));

  InteractionRecord rec;
  const json& ctx = field(j, "context");
  rec.context.user_id = as_int(field(ctx, "user_id"), "user_id");
  rec.context.features = features_from_json(ctx);

  const json& actions = field(j, "actions");
  if (!actions.is_array()) throw std::invalid_argument("'actions' must be an array");
  for (const auto& a : actions)
    rec.action_set.actions.push_back({as_int(field(a, "action_id"), "action_id"), features_from_json(a)});

  rec.chosen_index = as_index(field(j, "chosen_index"), "chosen_index");
  const json& probs = field(j, "behavior_probs");
  if (!probs.is_array()) throw std::invalid_argument("'behavior_probs' must be an array");
  for (const auto& p : probs) rec.behavior_probs.probs.push_back(as_real(p, "behavior_probs"));
  rec.feedback.signal_id = as_index(field(j, "feedback_signal"), "feedback_signal");
  if (auto it = j.find("latent_reward"); it != j.end())
    rec.latent_reward = latent_reward_from_int(static_cast<int>(as_int(*it, "latent_reward")));
  return rec;
}

}  // namespace record_json

/// One line of the record file, without the trailing newline.
inline std::string format_record(const InteractionRecord& rec) {
  return record_json::to_json(rec).dump();
}

/// Writes validated records, one per line. Returns the number written.
template <typename Range>
std::size_t write_records(const Range& records, std::ostream& sink) {
  std::size_t count = 0;
  for (const InteractionRecord& rec : records) {
    validate_record(rec);
    sink << format_record(rec) << '\n';
    if (!sink) throw SinkError("write failed after " + std::to_string(count) + " records");
    ++count;
  }
  sink.flush();
  if (!sink) throw SinkError("flush failed");
  return count;
}

/// Incremental writer for capturing a run step by step.
class RecordWriter {
 public:
  explicit RecordWriter(std::ostream& sink) : sink_(&sink) {}

  void write(const InteractionRecord& rec) {
    validate_record(rec);
    *sink_ << format_record(rec) << '\n';
    if (!*sink_) throw SinkError("write failed after " + std::to_string(count_) + " records");
    ++count_;
  }

  std::size_t count() const noexcept { return count_; }

 private:
  std::ostream* sink_;
  std::size_t count_ = 0;
};

/// Streaming reader. Blank lines are skipped but still counted, so reported
/// line numbers match the file.
class RecordReader {
 public:
  explicit RecordReader(std::istream& source, std::optional<std::uint32_t> feedback_count = {})
      : source_(&source), feedback_count_(feedback_count) {}

  std::optional<InteractionRecord> next() {
    std::string text;
    while (std::getline(*source_, text)) {
      ++line_;
      if (!text.empty() && text.back() == '\r') text.pop_back();
      if (text.find_first_not_of(" \t") == std::string::npos) continue;
      return parse_line(text);
    }
    return std::nullopt;
  }

  std::optional<InteractionRecord> operator()() { return next(); }

  /// Line number of the most recently read line (1-based).
  std::size_t line() const noexcept { return line_; }

 private:
  InteractionRecord parse_line(const std::string& text) const {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(line_, e.what());
    }
    InteractionRecord rec;
    try {
      rec = record_json::from_json(j);
      validate_record(rec, feedback_count_);
    } catch (const ValidationError& e) {
      throw RecordValidationError(line_, e);
    } catch (const std::invalid_argument& e) {
      throw ParseError(line_, e.what());
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line_, e.what());
    }
    return rec;
  }

  std::istream* source_;
  std::optional<std::uint32_t> feedback_count_;
  std::size_t line_ = 0;
};

/// Reads a whole stream; throws on the first bad line.
inline std::vector<InteractionRecord> read_records(std::istream& source,
                                                   std::optional<std::uint32_t> feedback_count = {}) {
  RecordReader reader(source, feedback_count);
  std::vector<InteractionRecord> out;
  while (auto rec = reader.next()) out.push_back(std::move(*rec));
  return out;
}

}  // namespace igllab
