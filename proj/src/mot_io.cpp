#include "mottx/mot_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string_view>

#include "mottx/errors.hpp"

namespace mottx {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

double parse_number(std::string_view field, const std::string& where, int column) {
  field = trim(field);
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (field.empty() || ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(value)) {
    throw DataError(where + ": field " + std::to_string(column) + " is not a finite number");
  }
  return value;
}

int parse_integer(std::string_view field, const std::string& where, int column) {
  const double v = parse_number(field, where, column);
  if (v != std::floor(v) || std::abs(v) > 2e9) {
    throw DataError(where + ": field " + std::to_string(column) + " must be an integer");
  }
  return static_cast<int>(v);
}

void append_number(std::string& line, double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  line.append(buf, ptr);
}

}  // namespace

MotData parse_mot(std::istream& in, const std::string& source) {
  MotData data;
  std::string line;
  int line_no = 0;
  std::vector<std::string_view> fields;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const std::string where = source + ":" + std::to_string(line_no);

    fields.clear();
    size_t pos = 0;
    while (true) {
      const size_t comma = body.find(',', pos);
      fields.push_back(body.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
    if (fields.size() < 7 || fields.size() > 10) {
      throw DataError(where + ": expected 7 to 10 comma-separated fields, found " + std::to_string(fields.size()));
    }

    Detection d;
    d.frame = parse_integer(fields[0], where, 1);
    if (d.frame < 1) throw DataError(where + ": frame numbers start at 1");
    d.tid = parse_integer(fields[1], where, 2);
    if (d.tid < -1) throw DataError(where + ": track id must be -1 or non-negative");
    const double left = parse_number(fields[2], where, 3);
    const double top = parse_number(fields[3], where, 4);
    const double w = parse_number(fields[4], where, 5);
    const double h = parse_number(fields[5], where, 6);
    if (!(w > 0.0) || !(h > 0.0)) throw DataError(where + ": box width and height must be positive");
    d.box = BBox::from_ltwh(left, top, w, h);
    d.conf = parse_number(fields[6], where, 7);
    if (d.conf < 0.0 || d.conf > 1.0) {
      d.conf = std::clamp(d.conf, 0.0, 1.0);
      ++data.clamped_conf;
    }
    if (fields.size() > 7) d.x = parse_number(fields[7], where, 8);
    if (fields.size() > 8) d.y = parse_number(fields[8], where, 9);
    if (fields.size() > 9) d.z = parse_number(fields[9], where, 10);

    if (static_cast<size_t>(d.frame) > data.frames.size()) data.frames.resize(static_cast<size_t>(d.frame));
    data.frames[static_cast<size_t>(d.frame - 1)].push_back(d);
  }
  if (in.bad()) throw DataError(source + ": read error");
  return data;
}

MotData read_mot(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return parse_mot(in, path.string());
}

void write_mot(std::ostream& out, const FrameDetections& frames, bool include_unassigned) {
  std::vector<const Detection*> order;
  std::string line;
  for (size_t f = 0; f < frames.size(); ++f) {
    order.clear();
    for (const Detection& d : frames[f]) {
      if (d.tid >= 0 || include_unassigned) order.push_back(&d);
    }
    std::stable_sort(order.begin(), order.end(), [](const Detection* a, const Detection* b) { return a->tid < b->tid; });
    for (const Detection* d : order) {
      line.clear();
      line += std::to_string(f + 1);
      line += ',';
      line += std::to_string(d->tid);
      for (double v : {d->box.left(), d->box.top(), d->box.w(), d->box.h(), d->conf, d->x, d->y, d->z}) {
        line += ',';
        append_number(line, v);
      }
      line += '\n';
      out << line;
    }
  }
}

void write_mot(const std::filesystem::path& path, const FrameDetections& frames, bool include_unassigned) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  write_mot(out, frames, include_unassigned);
  if (!out) throw DataError("write failed: " + path.string());
}

}  // namespace mottx
