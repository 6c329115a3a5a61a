#include "arp/external_scorer.hpp"

#include <cerrno>
#include <cmath>
#include <csignal>
#include <cstring>
#include <filesystem>

#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "arp/error.hpp"
#include "arp/image_io.hpp"

namespace arp {

namespace {

void write_all(int fd, const std::string& s) {
  std::size_t off = 0;
  while (off < s.size()) {
    const ssize_t n = ::write(fd, s.data() + off, s.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw IoError(std::string("external scorer: write failed: ") + std::strerror(errno));
    }
    off += static_cast<std::size_t>(n);
  }
}

}  // namespace

ExternalScorer::ExternalScorer(std::vector<std::string> argv, std::vector<SignClass> classes, std::string work_dir)
    : classes_(std::move(classes)), work_dir_(std::move(work_dir)) {
  if (argv.empty()) throw InvalidArgument("external scorer: empty command");
  if (classes_.empty()) throw InvalidArgument("external scorer: empty class list");
  std::filesystem::create_directories(work_dir_);

  int in_pipe[2], out_pipe[2];
  if (::pipe(in_pipe) != 0 || ::pipe(out_pipe) != 0) throw IoError("external scorer: pipe failed");
  // A dead child must surface as an error, not kill us.
  std::signal(SIGPIPE, SIG_IGN);

  const pid_t pid = ::fork();
  if (pid < 0) throw IoError("external scorer: fork failed");
  if (pid == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    ::close(out_pipe[1]);
    std::vector<char*> args;
    for (auto& a : argv) args.push_back(a.data());
    args.push_back(nullptr);
    ::execvp(args[0], args.data());
    ::_exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  pid_ = pid;
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  ::fcntl(to_child_, F_SETFD, FD_CLOEXEC);
  ::fcntl(from_child_, F_SETFD, FD_CLOEXEC);
}

ExternalScorer::~ExternalScorer() {
  if (to_child_ >= 0) ::close(to_child_);
  if (from_child_ >= 0) ::close(from_child_);
  if (pid_ > 0) {
    int status = 0;
    ::waitpid(pid_, &status, 0);
  }
}

std::string ExternalScorer::read_line() const {
  for (;;) {
    const auto nl = pending_.find('\n');
    if (nl != std::string::npos) {
      std::string line = pending_.substr(0, nl);
      pending_.erase(0, nl + 1);
      return line;
    }
    char buf[4096];
    const ssize_t n = ::read(from_child_, buf, sizeof buf);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw IoError("external scorer: child closed its output");
    pending_.append(buf, static_cast<std::size_t>(n));
  }
}

std::vector<double> ExternalScorer::scores(const RenderedImage& image) const {
  const std::string path = (std::filesystem::path(work_dir_) / ("query_" + std::to_string(counter_++) + ".ppm")).string();
  write_ppm(path, tone_map(image));

  nlohmann::json req;
  req["image"] = path;
  req["classes"] = nlohmann::json::array();
  for (SignClass c : classes_) req["classes"].push_back(class_name(c));
  write_all(to_child_, req.dump() + "\n");

  const std::string line = read_line();
  std::filesystem::remove(path);
  nlohmann::json resp;
  try {
    resp = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("external scorer: bad response: ") + e.what());
  }
  if (!resp.is_object() || !resp.contains("confidence") || !resp["confidence"].is_array())
    throw ProtocolError("external scorer: response lacks a confidence array");
  const auto& arr = resp["confidence"];
  if (arr.size() != classes_.size())
    throw ProtocolError("external scorer: expected " + std::to_string(classes_.size()) + " confidences, got " +
                        std::to_string(arr.size()));
  std::vector<double> out;
  for (const auto& v : arr) {
    if (!v.is_number()) throw ProtocolError("external scorer: non-numeric confidence");
    const double x = v.get<double>();
    if (!std::isfinite(x) || x < 0.0 || x > 1.0) throw ProtocolError("external scorer: confidence outside [0, 1]");
    out.push_back(x);
  }
  return out;
}

}  // namespace arp
