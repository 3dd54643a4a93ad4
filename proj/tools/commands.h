#ifndef HPAL_TOOLS_COMMANDS_H_
#define HPAL_TOOLS_COMMANDS_H_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace hpal::cli {

struct Common {
  std::string config_path;
  // Dotted key ("trainer.steps") to JSON literal text.
  std::map<std::string, std::string> overrides;
  unsigned threads = 0;  // 0 = hardware concurrency
  bool timings = false;
};

struct GenArgs {
  std::size_t points = 50000;
  std::size_t classes = 8;
  std::uint64_t seed = 1;
  std::vector<double> room = {8.0, 6.0, 3.0};
  double surface_noise = 0.005;
  double color_noise = 0.06;
  double outlier_fraction = 0.005;
  std::string out;
};

struct ScoreArgs {
  std::string cloud, probs, out;
  std::optional<std::string> strategy;
  std::uint64_t seed = 0;
};

struct SelectArgs {
  std::string cloud, scores, features, labeled, out, report;
  long long k = 0;
};

struct SimulateArgs {
  std::string cloud, out;
  std::string strategies = "random,mmu,hmmu,hmmu_fds";
  std::optional<std::size_t> seeds;
  std::string selections_dir;
};

struct EvalArgs {
  std::string pred, cloud, out;
};

void RunGen(const GenArgs& a, const Common& c);
void RunScore(const ScoreArgs& a, const Common& c);
void RunSelect(const SelectArgs& a, const Common& c);
void RunSimulate(const SimulateArgs& a, const Common& c);
void RunEval(const EvalArgs& a, const Common& c);

}  // namespace hpal::cli

#endif  // HPAL_TOOLS_COMMANDS_H_
