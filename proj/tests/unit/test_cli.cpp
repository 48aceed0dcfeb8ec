#include <gtest/gtest.h>

#include <cstdlib>
#include <string>
#include <sys/wait.h>

#include <nlohmann/json.hpp>

#include "blinkkit/candidates.hpp"
#include "blinkkit/synthdata.hpp"
#include "test_util.hpp"

using namespace blinkkit;
namespace bt = blinkkit::testing;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

Result tool(const std::string& args, const bt::TempDir& dir) {
  const auto out = dir / "stdout.txt";
  const std::string cmd = std::string(BLINKKIT_TOOL_PATH) + " " + args + " > " + out.string() + " 2> " +
                          (dir / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, bt::read_text(out)};
}

}  // namespace

TEST(Cli, ExitCodes) {
  bt::TempDir dir;
  EXPECT_EQ(tool("frobnicate", dir).code, 2);
  EXPECT_EQ(tool("", dir).code, 2);
  EXPECT_EQ(tool("synth session", dir).code, 2);
  EXPECT_EQ(tool("--help", dir).code, 0);
  EXPECT_EQ(tool("synth session --out " + (dir / "s").string() + " --duration 60 --blink-times 10 10.1", dir).code, 1);
  EXPECT_EQ(tool("synth session --out " + (dir / "s").string() + " --duration 60 --blinks 5", dir).code, 0);
  EXPECT_EQ(tool("train --checkpoint " + (dir / "m.tar").string(), dir).code, 2);
}

TEST(Cli, SynthSessionIsReproducible) {
  bt::TempDir dir;
  const auto a = dir / "a", b = dir / "b";
  ASSERT_EQ(tool("synth session --blinks 20 --duration 240 --seed 7 --out " + a.string(), dir).code, 0);
  ASSERT_EQ(tool("synth session --blinks 20 --duration 240 --seed 7 --out " + b.string(), dir).code, 0);
  for (const char* f : {"session.json", "eeg.csv", "ground_truth.csv"}) {
    EXPECT_EQ(bt::read_text(a / f), bt::read_text(b / f)) << f;
  }
  EXPECT_EQ(load_ground_truth(a / "ground_truth.csv").size(), 20u);
}

TEST(Cli, RunLogRecordsCommandAndError) {
  bt::TempDir dir;
  const auto log = dir / "run.json";
  ASSERT_EQ(tool("--run-log " + log.string() + " synth session --seed 3 --duration 30 --out " + (dir / "s").string(), dir).code, 0);
  auto j = nlohmann::json::parse(bt::read_text(log));
  EXPECT_EQ(j["command"], "synth session");
  EXPECT_EQ(j["exit_code"], 0);
  EXPECT_EQ(j["seeds"]["session"], 3);
  EXPECT_TRUE(j.contains("version"));
  EXPECT_TRUE(j.contains("started_at"));

  ASSERT_EQ(tool("--run-log " + log.string() + " synth session --duration 60 --blink-times 5 5.1 --out " +
                     (dir / "t").string(), dir).code, 1);
  j = nlohmann::json::parse(bt::read_text(log));
  EXPECT_EQ(j["exit_code"], 1);
  EXPECT_EQ(j["error"]["code"], "OverlappingBlinks");
}

TEST(Cli, ExtractAndDryRunBuild) {
  bt::TempDir dir;
  const auto s = dir / "s";
  ASSERT_EQ(tool("synth session --duration 60 --blink-times 5 15 25 40 --seed 2 --out " + s.string(), dir).code, 0);
  const auto cands = dir / "candidates.csv";
  const auto r = tool("extract-candidates --session " + (s / "session.json").string() + " --out " + cands.string(), dir);
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out.substr(0, 12), "4 candidates");
  const auto c = load_candidates(cands);
  ASSERT_EQ(c.size(), 4u);
  EXPECT_EQ(c[2].center_frame, 750);

  const auto decisions = dir / "decisions.csv";
  append_decision({c[0].candidate_id, Decision::Accept, "a", Timestamp{}}, decisions);
  append_decision({c[1].candidate_id, Decision::Accept, "a", Timestamp{}}, decisions);
  append_decision({c[2].candidate_id, Decision::Reject, "a", Timestamp{}}, decisions);
  append_decision({c[3].candidate_id, Decision::Reject, "a", Timestamp{}}, decisions);
  const auto d = tool("build-dataset --dry-run --session " + (s / "session.json").string() + " --candidates " +
                          cands.string() + " --decisions " + decisions.string() + " --out " + (dir / "ds").string(),
                      dir);
  ASSERT_EQ(d.code, 0) << bt::read_text(dir / "stderr.txt");
  EXPECT_EQ(d.out.substr(0, 20), "blink 2, no_blink 2,");
  EXPECT_FALSE(std::filesystem::exists(dir / "ds" / "blink"));
}
