#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"
#include "commands.h"
#include "hpal/core_model.h"

namespace {

using hpal::cli::Common;

// Registers a flag whose value lands in the merged config under `key`.
template <typename T>
void Override(CLI::App* app, Common& common, const std::string& flag,
              const std::string& key, const std::string& help) {
  app->add_option_function<std::string>(
         flag, [&common, key](const std::string& v) { common.overrides[key] = v; },
         help)
      ->type_name(std::is_same_v<T, std::string> ? "TEXT" : "NUM");
}

void AddCommon(CLI::App* app, Common& common) {
  app->add_option("--config", common.config_path, "JSON run configuration")
      ->check(CLI::ExistingFile);
  app->add_option("--threads", common.threads, "Worker threads (0 = auto)");
  app->add_flag("--timings", common.timings, "Print phase timings to stderr");
}

void AddConfigOverrides(CLI::App* app, Common& common) {
  Override<double>(app, common, "--fds-radius", "fds.radius_m",
                   "Suppression radius in meters");
  Override<double>(app, common, "--tau", "fds.tau", "Similarity threshold");
  Override<std::string>(app, common, "--context-mode", "context_mode",
                        "exact or voxel");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hpal: hierarchical uncertainty active learning for point clouds"};
  app.require_subcommand(1);
  Common common;

  hpal::cli::GenArgs gen;
  auto* g = app.add_subcommand("gen", "Generate a synthetic labeled scene");
  g->add_option("--points", gen.points, "Point count");
  g->add_option("--classes", gen.classes, "Class count");
  g->add_option("--seed", gen.seed, "Scene seed");
  g->add_option("--room", gen.room, "Room extents x y z in meters")
      ->expected(3)
      ->delimiter(',');
  g->add_option("--surface-noise", gen.surface_noise, "Meters");
  g->add_option("--color-noise", gen.color_noise, "Color noise sigma");
  g->add_option("--outlier-fraction", gen.outlier_fraction, "Fraction");
  g->add_option("--out", gen.out, "Output PLY")->required();
  g->add_option("--threads", common.threads, "Unused; accepted for symmetry");
  g->add_flag("--timings", common.timings, "Print phase timings to stderr");

  hpal::cli::ScoreArgs score;
  auto* s = app.add_subcommand("score", "Score points from a probability matrix");
  s->add_option("--cloud", score.cloud, "Input PLY")->required();
  s->add_option("--probs", score.probs, "N x C probability matrix")->required();
  s->add_option("--strategy", score.strategy, "Scoring strategy");
  s->add_option("--seed", score.seed, "Seed for the random strategy");
  s->add_option("--out", score.out, "Output N x 1 score matrix")->required();
  AddCommon(s, common);
  AddConfigOverrides(s, common);

  hpal::cli::SelectArgs select;
  auto* sel = app.add_subcommand("select", "Pick points to annotate");
  sel->add_option("--cloud", select.cloud, "Input PLY")->required();
  sel->add_option("--scores", select.scores, "N x 1 score matrix")->required();
  sel->add_option("--features", select.features, "N x F feature matrix");
  sel->add_option("--labeled", select.labeled, "Already-labeled index list");
  sel->add_option("--k", select.k, "Budget")->required();
  sel->add_option("--out", select.out, "Output selection list")->required();
  sel->add_option("--report", select.report, "Output JSON report");
  Override<std::string>(sel, common, "--strategy", "strategy",
                        "Strategy deciding ranking and suppression");
  AddCommon(sel, common);
  AddConfigOverrides(sel, common);

  hpal::cli::SimulateArgs sim;
  auto* sm = app.add_subcommand("simulate", "Run the active-learning loop");
  sm->add_option("--cloud", sim.cloud, "Labeled input PLY")->required();
  sm->add_option("--strategies", sim.strategies, "Comma-separated list");
  sm->add_option("--seeds", sim.seeds, "Run seeds 1..N");
  sm->add_option("--out", sim.out, "Output results.json")->required();
  sm->add_option("--selections-dir", sim.selections_dir,
                 "Write per-iteration selection lists here");
  Override<std::size_t>(sm, common, "--iterations", "budget.iterations",
                        "Active iterations");
  Override<double>(sm, common, "--per-iter-fraction", "budget.per_iter_fraction",
                   "Labeled fraction added per iteration");
  Override<double>(sm, common, "--initial-fraction", "budget.initial_fraction",
                   "Labeled fraction before the first iteration");
  Override<std::size_t>(sm, common, "--steps", "trainer.steps",
                        "Gradient steps per iteration");
  Override<double>(sm, common, "--alpha", "trainer.alpha", "EMA keep rate");
  Override<double>(sm, common, "--learning-rate", "trainer.learning_rate",
                   "Step size");
  Override<double>(sm, common, "--pseudo-threshold", "trainer.pseudo_threshold",
                   "Teacher confidence for pseudo-labels");
  Override<std::size_t>(sm, common, "--seed", "trainer.seed",
                        "Seed when --seeds is not given");
  AddCommon(sm, common);
  AddConfigOverrides(sm, common);

  hpal::cli::EvalArgs eval;
  auto* e = app.add_subcommand("eval", "Score predictions against ground truth");
  e->add_option("--pred", eval.pred, "N x 1 int or N x C float matrix")
      ->required();
  e->add_option("--cloud", eval.cloud, "Labeled PLY")->required();
  e->add_option("--out", eval.out, "Output metrics.json")->required();
  e->add_flag("--timings", common.timings, "Print phase timings to stderr");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& h) {
    return app.exit(h);
  } catch (const CLI::CallForAllHelp& h) {
    return app.exit(h);
  } catch (const CLI::ParseError& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return 2;
  }

  try {
    if (g->parsed()) hpal::cli::RunGen(gen, common);
    if (s->parsed()) hpal::cli::RunScore(score, common);
    if (sel->parsed()) hpal::cli::RunSelect(select, common);
    if (sm->parsed()) hpal::cli::RunSimulate(sim, common);
    if (e->parsed()) hpal::cli::RunEval(eval, common);
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return 1;
  }
  return 0;
}
