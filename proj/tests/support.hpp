#pragma once

// Helpers shared by the unit tests and the acceptance runner.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

// Eigen must come before httplib: <resolv.h> defines a _res macro that
// collides with Eigen's parameter names.
#include "kvqa/knowledge.hpp"
#include "kvqa/pipeline.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include "httplib.h"
#include "json.hpp"

namespace kvqa::testing {

namespace fs = std::filesystem;

inline fs::path fixture_dir() { return fs::path(KVQA_FIXTURE_DIR); }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "kvqa") {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = fs::temp_directory_path() /
            (tag + "-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline void spit(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
}

/// |a - n| / max(|a|, |n|), with the denominator floored at 1e-6 so that
/// gradients near zero are judged on absolute error.
inline double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / denom;
}

/// Literal walk of the knowledgeExtraction loop: every attribute is visited,
/// know(m) is called for matches, and for non-matches only while count has
/// not reached the budget (count++ after each such call).
inline std::vector<std::string> simulate_selection(const std::vector<std::string>& attributes,
                                                   const std::vector<std::string>& question,
                                                   std::size_t budget, SelectionMode mode) {
  std::vector<std::string> known;
  auto know = [&known](const std::string& m) { known.push_back(m); };
  std::size_t count = 0;
  for (std::size_t k = 0; k < attributes.size(); k++) {
    const std::string& m = attributes[k];
    bool in_question = false;
    for (const std::string& w : question) {
      if (w == m) in_question = true;
    }
    if (mode == SelectionMode::ImageOnly) in_question = false;
    if (in_question) {
      know(m);
    } else {
      if (mode == SelectionMode::QuestionOnly) continue;
      if (count == budget) continue;
      know(m);
      count++;
    }
  }
  return known;
}

/// ConceptNet-shaped HTTP server answering /c/en/{concept}?limit=n from a
/// local store file. Runs on a background thread until destroyed.
class FixtureKnowledgeServer {
 public:
  explicit FixtureKnowledgeServer(const fs::path& store_path)
      : store_(std::make_unique<LocalKnowledgeStore>(LocalKnowledgeStore::load(store_path))) {
    server_.Get(R"(/c/en/([^/?]+))", [this](const httplib::Request& req, httplib::Response& res) {
      ++requests_;
      std::string concept_id = req.matches[1];
      std::replace(concept_id.begin(), concept_id.end(), '_', ' ');
      std::size_t limit = 1000;
      if (req.has_param("limit")) limit = std::stoul(req.get_param_value("limit"));
      const auto triples = store_->edges(concept_id, limit);
      if (triples.empty()) {
        res.status = 404;
        res.set_content(R"({"error": "unknown concept"})", "application/json");
        return;
      }
      nlohmann::json edges = nlohmann::json::array();
      for (const auto& t : triples) {
        nlohmann::json e;
        e["start"] = {{"label", t.head}};
        e["rel"] = {{"label", std::string(relation_name(t.relation))}};
        e["end"] = {{"label", t.tail}};
        if (t.surface) e["surfaceText"] = *t.surface;
        if (t.weight) e["weight"] = *t.weight;
        edges.push_back(e);
      }
      res.set_content(nlohmann::json{{"edges", edges}}.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FixtureKnowledgeServer() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }
  int requests() const { return requests_; }

 private:
  std::unique_ptr<LocalKnowledgeStore> store_;
  httplib::Server server_;
  int port_ = 0;
  std::atomic<int> requests_{0};
  std::thread thread_;
};

/// A loopback URL where nothing listens: reserve a free port, then close it.
inline std::string dead_url() {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr));
  socklen_t len = sizeof(addr);
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  ::close(fd);
  return "http://127.0.0.1:" + std::to_string(ntohs(addr.sin_port));
}

/// Fixture run configuration with the work tree redirected into `work`.
inline RunConfig fixture_config(const fs::path& work, const std::string& name = "config.json") {
  RunConfig c = load_run_config(fixture_dir() / name);
  c.paths.work_dir = work;
  return c;
}

}  // namespace kvqa::testing
