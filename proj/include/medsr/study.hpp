#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace medsr {

/// Client errors surfaced by the study service; the HTTP layer maps them to
/// 400 and 404 responses.
struct StudyBadRequest : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct StudyNotFound : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kPairsPerSession = 100;

/// Pairwise forced-choice study over pre-rendered images.
///
/// results_dir layout:
///   methods.json                       {"method_a": "...", "method_b": "..."}
///   x2/<pair>/original.png, method_a.png, method_b.png
///   x4/<pair>/...
/// Exposed pair ids are "x<factor>-<pair>". Which method is shown on which
/// side depends only on (annotator, factor, pair, seed) and is never sent to
/// the client while a session is open.
class StudyService {
 public:
  StudyService(std::filesystem::path results_dir, std::uint64_t seed, std::filesystem::path votes_file);
  ~StudyService();

  struct PairSlot {
    std::string pair_id;
    bool method_a_on_left = true;
  };

  /// Up to 100 pairs in a deterministic per-annotator order.
  std::vector<PairSlot> session_pairs(const std::string& annotator, int factor) const;

  nlohmann::json session(const std::string& annotator, int factor) const;
  /// Path of the PNG behind a role (original, left or right) for this annotator.
  std::filesystem::path image(const std::string& annotator, const std::string& pair_id, const std::string& role) const;
  /// Validates and appends a vote; returns the acknowledgement body.
  nlohmann::json vote(const nlohmann::json& body);
  nlohmann::json report() const;

  const std::string& method_a() const { return method_a_; }
  const std::string& method_b() const { return method_b_; }

 private:
  struct Pool {
    std::vector<std::string> pairs;  // directory names, sorted
  };
  const Pool& pool(int factor) const;
  std::filesystem::path pair_dir(const std::string& pair_id, int& factor) const;

  std::filesystem::path results_dir_;
  std::uint64_t seed_;
  std::string method_a_, method_b_;
  std::map<int, Pool> pools_;

  mutable std::mutex mutex_;
  int votes_fd_ = -1;
  // (annotator, factor) -> pair_id -> chosen side ("left" / "right")
  std::map<std::pair<std::string, int>, std::map<std::string, std::string>> votes_;
};

struct StudyReport {
  struct Row {
    std::string annotator;
    std::map<int, std::map<std::string, std::size_t>> counts;  // factor -> method -> votes
  };
  std::vector<Row> rows;                               // sorted by annotator
  std::map<int, std::vector<std::string>> methods;     // factor -> method names
  std::map<int, std::map<std::string, double>> overall_percent;
  std::size_t records = 0;
  std::size_t skipped_lines = 0;

  std::string to_table() const;
  nlohmann::json to_json() const;
};

/// Aggregates a JSONL vote log (last vote per annotator, factor and pair
/// wins). Corrupt lines are skipped and counted.
StudyReport study_report(const std::filesystem::path& votes_file);
StudyReport study_report_from_lines(const std::vector<std::string>& lines);

/// Serves the study API over HTTP until stop() is called.
class StudyHttpServer {
 public:
  explicit StudyHttpServer(StudyService& service);
  ~StudyHttpServer();
  /// Binds (port 0 picks a free port) and returns the bound port.
  int bind(const std::string& host, int port);
  /// Blocks serving requests.
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace medsr
