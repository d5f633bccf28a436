// Regenerates the synthetic datasets, embeddings and configurations under
// tests/data. Usage: make_fixtures <output-dir>
#include <fstream>
#include <iostream>

#include "json.hpp"
#include "otn/app.hpp"
#include "otn/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kOverfitSeed = 7;
constexpr std::uint64_t kBenchmarkSeed = 11;

void write_config(const fs::path& path, const json& j) {
  std::ofstream(path) << j.dump(2) << '\n';
}

json compact_model() {
  otn::ModelConfig m;
  m.dims = otn::small_dims();
  return otn::to_json(m);
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_fixtures <output-dir>\n";
    return 2;
  }
  const fs::path dir = argv[1];
  fs::create_directories(dir);

  std::vector<otn::AlscInstance> alsc;
  std::vector<otn::AoweInstance> aowe;
  for (const auto& s : otn::generate_sentences(20, kOverfitSeed)) {
    alsc.push_back(s.alsc());
    aowe.push_back(s.aowe());
  }
  otn::save_alsc_dataset(dir / "overfit_alsc.jsonl", alsc);
  otn::save_aowe_dataset(dir / "overfit_aowe.jsonl", aowe);

  const auto bench = otn::make_benchmark(500, 200, kBenchmarkSeed);
  otn::save_alsc_dataset(dir / "synth_alsc_train.jsonl", bench.alsc_train);
  otn::save_aowe_dataset(dir / "synth_aowe_train.jsonl", bench.aowe_train);
  otn::save_alsc_dataset(dir / "synth_alsc_test.jsonl", bench.alsc_test);
  otn::save_aowe_dataset(dir / "synth_aowe_test.jsonl", bench.aowe_test);

  const auto& lexicon = otn::Lexicon::restaurant();
  otn::write_lexicon_embeddings(dir / "synth_embeddings_300d.txt", lexicon, 300, 5);
  otn::write_lexicon_embeddings(dir / "synth_embeddings_16d.txt", lexicon, 16, 5);

  // Full-size model fitting the overfit fixture, validated on itself.
  json overfit = otn::to_json(otn::ModelConfig{});
  overfit.update(json{{"data.alsc_train", "overfit_alsc.jsonl"},
                      {"data.alsc_valid", "overfit_alsc.jsonl"},
                      {"data.alsc_test", "overfit_alsc.jsonl"},
                      {"data.aowe_train", "overfit_aowe.jsonl"},
                      {"data.aowe_valid", "overfit_aowe.jsonl"},
                      {"data.aowe_test", "overfit_aowe.jsonl"},
                      {"train.max_epochs", 300},
                      {"train.target_monitor", 2.0},
                      {"data.embeddings", "synth_embeddings_300d.txt"},
                      {"train.num_runs", 1},
                      {"train.seed", 1}});
  write_config(dir / "overfit.json", overfit);

  // Compact model on the overfit fixture, for fast command tests.
  json quick = compact_model();
  quick.update(json{{"data.alsc_train", "overfit_alsc.jsonl"},
                    {"data.alsc_test", "overfit_alsc.jsonl"},
                    {"data.aowe_train", "overfit_aowe.jsonl"},
                    {"data.aowe_test", "overfit_aowe.jsonl"},
                    {"data.embeddings", "synth_embeddings_16d.txt"},
                    {"train.num_runs", 1},
                    {"train.max_epochs", 15},
                    {"train.seed", 1}});
  write_config(dir / "quick.json", quick);

  // Compact model on the disjoint-annotation benchmark.
  json synth = compact_model();
  synth.update(json{{"data.alsc_train", "synth_alsc_train.jsonl"},
                    {"data.alsc_test", "synth_alsc_test.jsonl"},
                    {"data.aowe_train", "synth_aowe_train.jsonl"},
                    {"data.aowe_test", "synth_aowe_test.jsonl"},
                    {"data.embeddings", "synth_embeddings_16d.txt"},
                    {"train.num_runs", 5},
                    {"train.seed", 1}});
  write_config(dir / "synthetic.json", synth);
  std::cout << "wrote fixtures to " << dir << '\n';
  return 0;
}
