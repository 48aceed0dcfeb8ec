#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "blinkkit/candidates.hpp"
#include "blinkkit/timestamp.hpp"

namespace blinkkit {

struct ReviewProgress {
  std::size_t total = 0;
  std::size_t pending = 0;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
};

/// Candidates plus their review status. The decisions file is the source of
/// truth: construction replays it, and every decision is appended to it before
/// the in-memory status changes.
class ReviewState {
 public:
  ReviewState(std::vector<BlinkCandidate> candidates, std::filesystem::path decisions_path);
  static ReviewState load(const std::filesystem::path& candidates_path, const std::filesystem::path& decisions_path);

  std::vector<BlinkCandidate> list(std::optional<CandidateStatus> status = std::nullopt) const;
  std::optional<BlinkCandidate> find(const std::string& candidate_id) const;
  ReviewProgress progress() const;
  const std::filesystem::path& decisions_path() const { return decisions_path_; }

  /// Appends the record, then applies it if it is the latest for the candidate
  /// (same rule as apply_decisions). Returns the candidate after the update;
  /// nullopt for an unknown id (nothing is written). Serialized across threads.
  std::optional<BlinkCandidate> decide(const DecisionRecord& record);

 private:
  void apply(const DecisionRecord& record);

  mutable std::mutex mutex_;
  std::vector<BlinkCandidate> candidates_;
  std::map<std::string, std::size_t> index_;
  std::map<std::string, Timestamp> latest_;
  std::filesystem::path decisions_path_;
};

struct ReviewConfig {
  std::filesystem::path candidates_path;
  std::filesystem::path decisions_path;
  /// Frames of a session live in `<frames_root>/<session_id>/%06d.png`.
  std::filesystem::path frames_root;
  /// Optional static UI bundle served at `/`.
  std::filesystem::path ui_dir;
  std::size_t page_size = 50;
  /// Source of decided_at; defaults to the system clock.
  std::function<Timestamp()> clock;
};

struct HttpRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
};

struct HttpResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

/// HTTP front of ReviewState:
///   GET  /api/candidates?status=&page=&page_size=    page is 0-based
///   GET  /api/candidates/{id}
///   GET  /api/candidates/{id}/frames/{k}      k in 0..20
///   POST /api/candidates/{id}/decision        {"decision": "accept"|"reject", "reviewer": "..."}
///   GET  /api/progress
class ReviewService {
 public:
  explicit ReviewService(ReviewConfig config);
  ~ReviewService();
  ReviewService(const ReviewService&) = delete;
  ReviewService& operator=(const ReviewService&) = delete;

  /// Transport-independent request handling (also used by the HTTP server).
  HttpResponse handle(const HttpRequest& request);

  /// Binds and serves until stop(); port 0 picks a free port. Returns false if binding fails.
  bool listen(const std::string& host, int port);
  /// Binds without serving yet; returns the bound port or -1.
  int bind(const std::string& host, int port);
  /// Serves on a socket bound by bind(); blocks until stop().
  bool serve();
  void stop();

  ReviewState& state();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace blinkkit
