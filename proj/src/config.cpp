#include "mottx/config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string_view>
#include <type_traits>
#include <vector>

#include "mottx/errors.hpp"

namespace mottx {

namespace {

std::string trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  if (trim(s).empty()) return parts;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) parts.push_back(trim(item));
  return parts;
}

template <typename T>
T parse_scalar(const std::string& key, const std::string& text) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if constexpr (std::is_same_v<T, bool>) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw DataError("config: " + key + " must be true or false, got '" + text + "'");
  } else {
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (text.empty() || ec != std::errc() || ptr != last) {
      throw DataError("config: cannot parse " + key + " = '" + text + "'");
    }
    return value;
  }
}

std::string fmt(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string fmt_windows(const std::vector<GapWindow>& windows) {
  std::string out;
  for (const GapWindow& w : windows) {
    if (!out.empty()) out += ",";
    out += std::to_string(w.tid) + ":" + std::to_string(w.start) + ":" + std::to_string(w.gap);
  }
  return out;
}

}  // namespace

template <typename T>
void KeyValues::get(const std::string& key, T& target) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return;
  used_.insert(key);
  const std::string& text = it->second;
  if constexpr (std::is_same_v<T, std::vector<int>>) {
    std::vector<int> out;
    for (const std::string& p : split(text, ',')) out.push_back(parse_scalar<int>(key, p));
    target = std::move(out);
  } else if constexpr (std::is_same_v<T, std::vector<GapWindow>>) {
    std::vector<GapWindow> out;
    for (const std::string& p : split(text, ',')) {
      const auto f = split(p, ':');
      if (f.size() != 3) throw DataError("config: " + key + " entries must be tid:start:gap, got '" + p + "'");
      out.push_back({parse_scalar<int>(key, f[0]), parse_scalar<int>(key, f[1]), parse_scalar<int>(key, f[2])});
    }
    target = std::move(out);
  } else {
    target = parse_scalar<T>(key, text);
  }
}

KeyValues KeyValues::parse(std::istream& in, const std::string& source) {
  KeyValues kv;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const size_t hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const size_t eq = body.find('=');
    const std::string where = source + ":" + std::to_string(line_no);
    if (eq == std::string::npos) throw DataError(where + ": expected key = value");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    if (key.empty()) throw DataError(where + ": empty key");
    if (kv.contains(key)) throw DataError(where + ": repeated key " + key);
    kv.set(key, value);
  }
  return kv;
}

KeyValues KeyValues::read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return parse(in, path.string());
}

void KeyValues::merge(const KeyValues& other) {
  for (const auto& [k, v] : other.values_) values_[k] = v;
}

void KeyValues::write(std::ostream& out) const {
  for (const auto& [k, v] : values_) out << k << " = " << v << '\n';
}

void KeyValues::write(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  write(out);
}

std::set<std::string> KeyValues::unused() const {
  std::set<std::string> out;
  for (const auto& [k, v] : values_) {
    if (!used_.count(k)) out.insert(k);
  }
  return out;
}

void KeyValues::apply(ModelConfig& c) const {
  get("d_model", c.d_model);
  get("n_layers", c.n_layers);
  get("n_heads", c.n_heads);
  get("ffn_dim", c.ffn_dim);
  get("max_window", c.max_window);
  get("norm_eps", c.norm_eps);
  get("dropout", c.dropout);
}

void KeyValues::apply(TrackerConfig& c) const {
  get("tau_det", c.tau_det);
  get("tau_new", c.tau_new);
  get("window_T", c.window_T);
  get("match_eps", c.match_eps);
  get("w_floor", c.w_floor);
}

void KeyValues::apply(TrainConfig& c) const {
  get("batch_size", c.batch_size);
  get("epochs", c.epochs);
  get("clip_schedule", c.clip_schedule);
  get("max_clip_length", c.max_clip_length);
  get("clips_per_epoch", c.clips_per_epoch);
  get("lr", c.lr);
  get("min_lr", c.min_lr);
  get("weight_decay", c.weight_decay);
  get("grad_clip", c.grad_clip);
  get("accumulation", c.accumulation);
  get("min_interval", c.min_interval);
  get("max_interval", c.max_interval);
  get("box_jitter", c.box_jitter);
  get("drop_rate", c.drop_rate);
  get("clutter_rate", c.clutter_rate);
  get("seed", c.seed);
}

void KeyValues::apply(SceneConfig& c) const {
  get("width", c.width);
  get("height", c.height);
  get("num_objects", c.num_objects);
  get("num_frames", c.num_frames);
  get("min_box_w", c.min_box_w);
  get("max_box_w", c.max_box_w);
  get("min_box_h", c.min_box_h);
  get("max_box_h", c.max_box_h);
  get("min_speed", c.min_speed);
  get("max_speed", c.max_speed);
  get("appearance_similarity", c.appearance_similarity);
  get("brightness_jitter", c.brightness_jitter);
  get("appearance_noise", c.appearance_noise);
  get("render", c.render);
  get("occlusions", c.occlusions);
  get("reentries", c.reentries);
  get("seed", c.seed);
}

void KeyValues::apply(NoiseConfig& c) const {
  get("box_sigma", c.box_sigma);
  get("fp_rate", c.fp_rate);
  get("fn_rate", c.fn_rate);
  get("conf_sigma", c.conf_sigma);
  get("fp_conf_min", c.fp_conf_min);
  get("fp_conf_max", c.fp_conf_max);
  get("noise_seed", c.seed);
}

KeyValues KeyValues::from(const ModelConfig& c) {
  KeyValues kv;
  kv.set("d_model", std::to_string(c.d_model));
  kv.set("n_layers", std::to_string(c.n_layers));
  kv.set("n_heads", std::to_string(c.n_heads));
  kv.set("ffn_dim", std::to_string(c.ffn_dim));
  kv.set("max_window", std::to_string(c.max_window));
  kv.set("norm_eps", fmt(c.norm_eps));
  kv.set("dropout", fmt(c.dropout));
  return kv;
}

KeyValues KeyValues::from(const TrackerConfig& c) {
  KeyValues kv;
  kv.set("tau_det", fmt(c.tau_det));
  kv.set("tau_new", fmt(c.tau_new));
  kv.set("window_T", std::to_string(c.window_T));
  kv.set("match_eps", fmt(c.match_eps));
  kv.set("w_floor", fmt(c.w_floor));
  return kv;
}

KeyValues KeyValues::from(const TrainConfig& c) {
  KeyValues kv;
  std::string schedule;
  for (int len : c.clip_schedule) schedule += (schedule.empty() ? "" : ",") + std::to_string(len);
  kv.set("batch_size", std::to_string(c.batch_size));
  kv.set("epochs", std::to_string(c.epochs));
  kv.set("clip_schedule", schedule);
  kv.set("max_clip_length", std::to_string(c.max_clip_length));
  kv.set("clips_per_epoch", std::to_string(c.clips_per_epoch));
  kv.set("lr", fmt(c.lr));
  kv.set("min_lr", fmt(c.min_lr));
  kv.set("weight_decay", fmt(c.weight_decay));
  kv.set("grad_clip", fmt(c.grad_clip));
  kv.set("accumulation", std::to_string(c.accumulation));
  kv.set("min_interval", std::to_string(c.min_interval));
  kv.set("max_interval", std::to_string(c.max_interval));
  kv.set("box_jitter", fmt(c.box_jitter));
  kv.set("drop_rate", fmt(c.drop_rate));
  kv.set("clutter_rate", fmt(c.clutter_rate));
  kv.set("seed", std::to_string(c.seed));
  return kv;
}

KeyValues KeyValues::from(const SceneConfig& c) {
  KeyValues kv;
  kv.set("width", std::to_string(c.width));
  kv.set("height", std::to_string(c.height));
  kv.set("num_objects", std::to_string(c.num_objects));
  kv.set("num_frames", std::to_string(c.num_frames));
  kv.set("min_box_w", fmt(c.min_box_w));
  kv.set("max_box_w", fmt(c.max_box_w));
  kv.set("min_box_h", fmt(c.min_box_h));
  kv.set("max_box_h", fmt(c.max_box_h));
  kv.set("min_speed", fmt(c.min_speed));
  kv.set("max_speed", fmt(c.max_speed));
  kv.set("appearance_similarity", fmt(c.appearance_similarity));
  kv.set("brightness_jitter", fmt(c.brightness_jitter));
  kv.set("appearance_noise", fmt(c.appearance_noise));
  kv.set("render", c.render ? "true" : "false");
  kv.set("occlusions", fmt_windows(c.occlusions));
  kv.set("reentries", fmt_windows(c.reentries));
  kv.set("seed", std::to_string(c.seed));
  return kv;
}

KeyValues KeyValues::from(const NoiseConfig& c) {
  KeyValues kv;
  kv.set("box_sigma", fmt(c.box_sigma));
  kv.set("fp_rate", fmt(c.fp_rate));
  kv.set("fn_rate", fmt(c.fn_rate));
  kv.set("conf_sigma", fmt(c.conf_sigma));
  kv.set("fp_conf_min", fmt(c.fp_conf_min));
  kv.set("fp_conf_max", fmt(c.fp_conf_max));
  kv.set("noise_seed", std::to_string(c.seed));
  return kv;
}

}  // namespace mottx
