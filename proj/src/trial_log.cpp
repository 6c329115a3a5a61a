#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "arp/error.hpp"
#include "arp/optimizer.hpp"

namespace arp {

namespace {

std::string header(int n_patches) {
  std::string h = "trial";
  for (int i = 0; i < n_patches; ++i) {
    const std::string k = std::to_string(i);
    h += ",x" + k + ",y" + k + ",w" + k + ",h" + k;
  }
  for (int i = 0; i < n_patches; ++i) {
    const std::string k = std::to_string(i);
    h += ",sx" + k + ",sy" + k + ",sw" + k + ",sh" + k;
  }
  return h + ",attack_loss,stealth_loss,objective,seed";
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string row(const Trial& t) {
  std::string r = std::to_string(t.index);
  for (double p : t.params) r += "," + fmt(p);
  for (double p : t.sampled()) r += "," + fmt(p);
  r += "," + fmt(t.attack_loss) + "," + fmt(t.stealth_loss) + "," + fmt(t.objective) + "," + std::to_string(t.seed);
  return r;
}

double parse_double(const std::string& s, const std::string& path) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0' || errno == ERANGE) throw IoError(path + ": bad number '" + s + "'");
  return v;
}

}  // namespace

void write_trial_log(const std::string& path, const TrialHistory& history, int n_patches) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write trial log " + path);
  out << header(n_patches) << '\n';
  for (const auto& t : history.trials) out << row(t) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

void append_trial_log(const std::string& path, const Trial& trial, int n_patches) {
  if (static_cast<int>(trial.params.size()) != 4 * n_patches || trial.sampled().size() != trial.params.size())
    throw InvalidArgument("trial width mismatch");
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw IoError("cannot append to trial log " + path);
  out << row(trial) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

TrialHistory read_trial_log(const std::string& path, int n_patches) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open trial log " + path);
  std::string line;
  if (!std::getline(in, line) || line != header(n_patches))
    throw IoError(path + ": header does not match a " + std::to_string(n_patches) + "-patch log");
  TrialHistory h;
  const std::size_t np = 4 * static_cast<std::size_t>(n_patches);
  const std::size_t width = 1 + 2 * np + 4;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    // A truncated last line from an interrupted run is dropped.
    if (cells.size() != width) {
      if (in.peek() == std::char_traits<char>::eof()) break;
      throw IoError(path + ": malformed row '" + line + "'");
    }
    Trial t;
    t.index = static_cast<int>(parse_double(cells[0], path));
    for (std::size_t k = 0; k < np; ++k) t.params.push_back(parse_double(cells[1 + k], path));
    for (std::size_t k = 0; k < np; ++k) t.suggested.push_back(parse_double(cells[1 + np + k], path));
    const std::size_t o = 1 + 2 * np;
    t.attack_loss = parse_double(cells[o], path);
    t.stealth_loss = parse_double(cells[o + 1], path);
    t.objective = parse_double(cells[o + 2], path);
    errno = 0;
    char* end = nullptr;
    t.seed = std::strtoull(cells[o + 3].c_str(), &end, 10);
    if (cells[o + 3].empty() || *end != '\0' || errno == ERANGE) throw IoError(path + ": bad seed");
    h.append(std::move(t));
  }
  return h;
}

}  // namespace arp
