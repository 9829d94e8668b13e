#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <set>
#include <string>

#include "mottx/model.hpp"
#include "mottx/synth.hpp"
#include "mottx/tracker.hpp"
#include "mottx/training.hpp"

namespace mottx {

/// Flat `key = value` settings. Keys mirror the config struct field names.
class KeyValues {
 public:
  /// Parses `key = value` lines; '#' starts a comment. Throws DataError with
  /// the line number on malformed lines or repeated keys.
  static KeyValues parse(std::istream& in, const std::string& source = "<stream>");
  static KeyValues read(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool contains(const std::string& key) const { return values_.count(key) > 0; }
  const std::map<std::string, std::string>& values() const { return values_; }

  /// Adds every entry of `other`, replacing existing keys.
  void merge(const KeyValues& other);

  void write(std::ostream& out) const;
  void write(const std::filesystem::path& path) const;

  /// Keys that no apply() call has read.
  std::set<std::string> unused() const;

  // Each apply() reads the keys it knows and leaves other fields untouched.
  // Values that do not parse throw DataError.
  void apply(ModelConfig& c) const;
  void apply(TrackerConfig& c) const;
  void apply(TrainConfig& c) const;
  void apply(SceneConfig& c) const;
  void apply(NoiseConfig& c) const;

  static KeyValues from(const ModelConfig& c);
  static KeyValues from(const TrackerConfig& c);
  static KeyValues from(const TrainConfig& c);
  static KeyValues from(const SceneConfig& c);
  static KeyValues from(const NoiseConfig& c);

 private:
  template <typename T>
  void get(const std::string& key, T& target) const;

  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

}  // namespace mottx
