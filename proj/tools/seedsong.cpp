// seedsong command-line tool: analyze a seed song, build corpus statistics,
// generate imitations, and score candidates against a style.
#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "seedsong/evaluate.hpp"
#include "seedsong/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInputError = 2;
constexpr int kExitInvariantError = 3;

int run(int argc, char** argv) {
  CLI::App app{"seedsong: stylistic pop song imitation from a single seed"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from a key=value config file");

  // analyze
  std::string analyze_path;
  auto* analyze = app.add_subcommand("analyze", "Print seed-song statistics");
  analyze->add_option("file", analyze_path, "score file (.txt or .mid)")
      ->required();

  // stats build
  auto* stats = app.add_subcommand("stats", "Corpus statistics");
  std::string stats_dir, stats_out = "stats.json";
  auto* stats_build =
      stats->add_subcommand("build", "Build stats.json from a corpus dir");
  stats_build->add_option("corpus", stats_dir, "directory of .txt/.chords/.mid")
      ->required();
  stats_build->add_option("-o,--out", stats_out, "output stats file");
  stats->require_subcommand(1);

  // generate
  seedsong::GenerationConfig cfg;
  auto* gen = app.add_subcommand("generate", "Generate an imitation song");
  gen->add_option("--seed", cfg.melody_seed, "seed song (melody + default)")
      ->required();
  gen->add_option("--chord-seed", cfg.chord_seed, "chord-style seed song");
  gen->add_option("--bass-seed", cfg.bass_seed, "bass-style seed song");
  gen->add_option("--structure-seed", cfg.structure_seed,
                  "structure seed song");
  gen->add_option("--stats", cfg.stats_path, "general stats.json")->required();
  gen->add_option("--structure", cfg.structure,
                  "copy | random | letter spec such as AABB");
  gen->add_option("--alpha-melody", cfg.alpha_melody,
                  "melody seed/general blend in [0,1]");
  gen->add_option("--alpha-chords", cfg.alpha_chords,
                  "chord seed/general blend in [0,1]");
  gen->add_option("--distinctive-threshold", cfg.distinctive_threshold,
                  "general-frequency bound for distinctive seed n-grams");
  gen->add_option("--rhythm-threshold", cfg.rhythm_threshold,
                  "onset-accuracy gate for melody durations");
  gen->add_option("--max-section-distance", cfg.max_section_distance,
                  "alignment distance threshold");
  gen->add_option("--candidates", cfg.candidates,
                  "melody candidates per section");
  gen->add_option("--rng-seed", cfg.rng_seed, "random seed");
  gen->add_option("--out", cfg.out, "output basename (.mid/.txt)")->required();

  // evaluate
  std::string eval_seed, eval_stats, eval_out;
  std::vector<std::string> eval_candidates;
  double eval_alpha = 0.5;
  auto* eval = app.add_subcommand("evaluate",
                                  "Score candidate songs against a seed style");
  eval->add_option("--seed", eval_seed, "style seed song")->required();
  eval->add_option("--candidates", eval_candidates, "candidate song files")
      ->required()
      ->expected(-1);
  eval->add_option("--stats", eval_stats, "general stats.json")->required();
  eval->add_option("--alpha", eval_alpha, "seed/general blend in [0,1]");
  eval->add_option("-o,--out", eval_out, "CSV output file (default stdout)");

  CLI11_PARSE(app, argc, argv);

  if (*analyze) {
    std::cout << seedsong::run_analyze(analyze_path);
    return kExitOk;
  }
  if (*stats_build) {
    const seedsong::StatTables t = seedsong::build_stats_from_dir(stats_dir);
    seedsong::save_stats(stats_out, t);
    std::cout << "wrote " << stats_out << "\n";
    return kExitOk;
  }
  if (*gen) {
    const seedsong::GenerationResult res = seedsong::run_generate(cfg);
    std::cout << "wrote " << cfg.out << ".mid and " << cfg.out << ".txt ("
              << res.song.total_bars() << " bars, tempo "
              << res.song.tempo << ")\n";
    for (const auto& [module, seed] : res.module_seeds) {
      std::cout << "  " << module << " <- " << seed << "\n";
    }
    return kExitOk;
  }
  if (*eval) {
    const seedsong::Song seed_song = seedsong::load_song(eval_seed);
    const seedsong::StatTables seed_tables = seedsong::build_seed_stats(seed_song);
    const seedsong::StatTables general = seedsong::load_stats(eval_stats);
    const seedsong::Style style{&seed_tables, &general, eval_alpha};
    std::vector<seedsong::LikelihoodReport> reports;
    for (const auto& path : eval_candidates) {
      const seedsong::Song song = seedsong::load_song(path);
      reports.push_back(seedsong::score_song(song, style, path, eval_seed));
    }
    const std::string csv = seedsong::report_csv(reports);
    if (eval_out.empty()) {
      std::cout << csv;
    } else {
      seedsong::write_file_atomic(eval_out, csv);
    }
    return kExitOk;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const seedsong::InvariantError& e) {
    std::cerr << "invariant violation: " << e.what() << "\n";
    return kExitInvariantError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInputError;
  }
}
