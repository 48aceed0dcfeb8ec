#include "blinkkit/review.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "blinkkit/error.hpp"

namespace fs = std::filesystem;

namespace blinkkit {

ReviewState::ReviewState(std::vector<BlinkCandidate> candidates, fs::path decisions_path)
    : candidates_(std::move(candidates)), decisions_path_(std::move(decisions_path)) {
  for (std::size_t i = 0; i < candidates_.size(); ++i) {
    index_[candidates_[i].candidate_id] = i;
    candidates_[i].status = CandidateStatus::Pending;
  }
  if (fs::exists(decisions_path_)) {
    for (const auto& d : load_decisions(decisions_path_)) apply(d);
  }
}

ReviewState ReviewState::load(const fs::path& candidates_path, const fs::path& decisions_path) {
  return ReviewState(load_candidates(candidates_path), decisions_path);
}

void ReviewState::apply(const DecisionRecord& record) {
  const auto it = index_.find(record.candidate_id);
  if (it == index_.end()) return;
  const auto last = latest_.find(record.candidate_id);
  if (last != latest_.end() && record.decided_at < last->second) return;
  latest_[record.candidate_id] = record.decided_at;
  candidates_[it->second].status =
      record.decision == Decision::Accept ? CandidateStatus::Accepted : CandidateStatus::Rejected;
}

std::vector<BlinkCandidate> ReviewState::list(std::optional<CandidateStatus> status) const {
  std::lock_guard lock(mutex_);
  std::vector<BlinkCandidate> out;
  for (const auto& c : candidates_) {
    if (!status || c.status == *status) out.push_back(c);
  }
  return out;
}

std::optional<BlinkCandidate> ReviewState::find(const std::string& candidate_id) const {
  std::lock_guard lock(mutex_);
  const auto it = index_.find(candidate_id);
  if (it == index_.end()) return std::nullopt;
  return candidates_[it->second];
}

ReviewProgress ReviewState::progress() const {
  std::lock_guard lock(mutex_);
  ReviewProgress p;
  p.total = candidates_.size();
  for (const auto& c : candidates_) {
    switch (c.status) {
      case CandidateStatus::Pending: ++p.pending; break;
      case CandidateStatus::Accepted: ++p.accepted; break;
      case CandidateStatus::Rejected: ++p.rejected; break;
    }
  }
  return p;
}

std::optional<BlinkCandidate> ReviewState::decide(const DecisionRecord& record) {
  std::lock_guard lock(mutex_);
  const auto it = index_.find(record.candidate_id);
  if (it == index_.end()) return std::nullopt;
  append_decision(record, decisions_path_);
  apply(record);
  return candidates_[it->second];
}

namespace {

nlohmann::json candidate_json(const BlinkCandidate& c, bool with_frames) {
  nlohmann::json j = {{"candidate_id", c.candidate_id}, {"session_id", c.session_id},
                      {"t_eeg", c.t_eeg},               {"center_frame", c.center_frame},
                      {"strength", c.strength},         {"status", std::string(to_string(c.status))}};
  if (with_frames) {
    j["first_frame"] = c.center_frame - kSampleHalfWidth;
    j["center_offset"] = kSampleHalfWidth;
    auto urls = nlohmann::json::array();
    for (int k = 0; k < kSampleFrames; ++k) {
      urls.push_back("/api/candidates/" + c.candidate_id + "/frames/" + std::to_string(k));
    }
    j["frames"] = urls;
  }
  return j;
}

HttpResponse json_response(int status, const nlohmann::json& body) {
  return {status, "application/json", body.dump()};
}

HttpResponse error_response(int status, const std::string& message) {
  return json_response(status, {{"error", message}});
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::stringstream ss(path);
  std::string part;
  while (std::getline(ss, part, '/')) {
    if (!part.empty()) parts.push_back(part);
  }
  return parts;
}

std::optional<long long> parse_integer(const std::string& s) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace

struct ReviewService::Impl {
  ReviewConfig config;
  ReviewState state;
  httplib::Server server;

  explicit Impl(ReviewConfig c)
      : config(std::move(c)), state(ReviewState::load(config.candidates_path, config.decisions_path)) {
    if (!config.clock) config.clock = utc_now;
  }

  HttpResponse list(const HttpRequest& req) {
    std::optional<CandidateStatus> status;
    if (auto it = req.query.find("status"); it != req.query.end() && !it->second.empty()) {
      status = parse_candidate_status(it->second);
      if (!status) return error_response(400, "unknown status '" + it->second + "'");
    }
    long long page = 0;
    long long page_size = static_cast<long long>(config.page_size);
    if (auto it = req.query.find("page"); it != req.query.end()) {
      const auto v = parse_integer(it->second);
      if (!v || *v < 0) return error_response(400, "bad page");
      page = *v;
    }
    if (auto it = req.query.find("page_size"); it != req.query.end()) {
      const auto v = parse_integer(it->second);
      if (!v || *v <= 0 || *v > 1000) return error_response(400, "bad page_size");
      page_size = *v;
    }
    const auto all = state.list(status);
    auto items = nlohmann::json::array();
    const auto first = static_cast<std::size_t>(page * page_size);
    for (std::size_t i = first; i < all.size() && i < first + static_cast<std::size_t>(page_size); ++i) {
      items.push_back(candidate_json(all[i], false));
    }
    return json_response(200, {{"items", items}, {"page", page}, {"page_size", page_size}, {"total", all.size()}});
  }

  HttpResponse frame(const BlinkCandidate& c, const std::string& k_text) {
    const auto k = parse_integer(k_text);
    if (!k || *k < 0 || *k >= kSampleFrames) return error_response(404, "frame offset must be 0-20");
    const long long index = c.center_frame - kSampleHalfWidth + *k;
    if (index < 0) return error_response(404, "frame before the session start");
    char name[32];
    std::snprintf(name, sizeof name, "%06lld.png", index);
    const fs::path path = config.frames_root / c.session_id / name;
    std::ifstream in(path, std::ios::binary);
    if (!in) return error_response(404, "frame not found");
    std::ostringstream data;
    data << in.rdbuf();
    return {200, "image/png", data.str()};
  }

  HttpResponse decide(const BlinkCandidate& c, const std::string& body) {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error&) {
      return error_response(400, "body must be JSON");
    }
    if (!doc.is_object() || !doc.contains("decision") || !doc["decision"].is_string()) {
      return error_response(400, "missing decision");
    }
    const auto decision = parse_decision(doc["decision"].get<std::string>());
    if (!decision) return error_response(400, "decision must be accept or reject");
    if (!doc.contains("reviewer") || !doc["reviewer"].is_string()) return error_response(400, "missing reviewer");
    const auto reviewer = doc["reviewer"].get<std::string>();
    if (reviewer.empty() || reviewer.find_first_of(",\r\n") != std::string::npos) {
      return error_response(400, "reviewer must be non-empty without commas or newlines");
    }
    DecisionRecord record{c.candidate_id, *decision, reviewer, config.clock()};
    try {
      const auto updated = state.decide(record);
      if (!updated) return error_response(404, "unknown candidate");
      auto j = candidate_json(*updated, false);
      j["decided_at"] = format_iso8601(record.decided_at);
      return json_response(200, j);
    } catch (const Error& e) {
      spdlog::error("decision write failed: {}", e.what());
      return error_response(500, e.what());
    }
  }

  HttpResponse handle(const HttpRequest& req) {
    const auto parts = split_path(req.path);
    if (parts.size() < 2 || parts[0] != "api") return error_response(404, "not found");
    if (parts[1] == "progress" && parts.size() == 2) {
      if (req.method != "GET") return error_response(405, "method not allowed");
      const auto p = state.progress();
      const double decided = p.total ? static_cast<double>(p.accepted + p.rejected) / p.total : 0.0;
      return json_response(200, {{"total", p.total},
                                 {"pending", p.pending},
                                 {"accepted", p.accepted},
                                 {"rejected", p.rejected},
                                 {"decided_fraction", decided}});
    }
    if (parts[1] != "candidates") return error_response(404, "not found");
    if (parts.size() == 2) {
      if (req.method != "GET") return error_response(405, "method not allowed");
      return list(req);
    }
    const auto candidate = state.find(parts[2]);
    if (!candidate) return error_response(404, "unknown candidate '" + parts[2] + "'");
    if (parts.size() == 3) {
      if (req.method != "GET") return error_response(405, "method not allowed");
      return json_response(200, candidate_json(*candidate, true));
    }
    if (parts.size() == 5 && parts[3] == "frames") {
      if (req.method != "GET") return error_response(405, "method not allowed");
      return frame(*candidate, parts[4]);
    }
    if (parts.size() == 4 && parts[3] == "decision") {
      if (req.method != "POST") return error_response(405, "method not allowed");
      return decide(*candidate, req.body);
    }
    return error_response(404, "not found");
  }

  void install_routes(ReviewService& owner) {
    auto forward = [&owner](const httplib::Request& req, httplib::Response& res) {
      HttpRequest r{req.method, req.path, {}, req.body};
      for (const auto& [k, v] : req.params) r.query[k] = v;
      const auto out = owner.handle(r);
      res.status = out.status;
      res.set_content(out.body, out.content_type);
    };
    server.Get(R"(/api/.*)", forward);
    server.Post(R"(/api/.*)", forward);
    if (!config.ui_dir.empty() && fs::is_directory(config.ui_dir)) {
      server.set_mount_point("/", config.ui_dir.string());
    }
  }
};

ReviewService::ReviewService(ReviewConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {
  impl_->install_routes(*this);
}

ReviewService::~ReviewService() { stop(); }

HttpResponse ReviewService::handle(const HttpRequest& request) { return impl_->handle(request); }

bool ReviewService::listen(const std::string& host, int port) {
  if (bind(host, port) < 0) return false;
  return serve();
}

int ReviewService::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool ReviewService::serve() { return impl_->server.listen_after_bind(); }

void ReviewService::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

ReviewState& ReviewService::state() { return impl_->state; }

}  // namespace blinkkit
