// Writes a small synthetic screenshot corpus to DIR, then clusters it with a
// simulated annotator and prints the metric rows.
//
//   quickstart DIR
//
// DIR then holds manifest.jsonl, taxonomy.txt, transcript.csv, embeddings.txt
// and images/, ready for the shotclust CLI.

#include <fstream>
#include <iostream>
#include <random>

#include "shotclust/pipeline.hpp"
#include "shotclust/session.hpp"

using namespace shotclust;
namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kScreens = {"mail", "maps", "chat"};
const std::vector<std::string> kWords = {"inbox", "send", "reply", "route", "north", "traffic", "message", "typing"};

// Each screen type has its own stripe layout plus noise.
RawImage screen(int kind, std::mt19937_64& gen) {
  RawImage img;
  img.width = 120;
  img.height = 90;
  img.channels = 1;
  img.max_value = 255;
  img.samples.resize(120 * 90);
  for (int r = 0; r < 90; ++r) {
    for (int c = 0; c < 120; ++c) {
      const bool on = kind == 0 ? (r / 10) % 2 : kind == 1 ? (c / 12) % 2 : ((r + c) / 9) % 2;
      img.samples[static_cast<std::size_t>(r * 120 + c)] = static_cast<std::uint16_t>(on * 180 + gen() % 60);
    }
  }
  return img;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: quickstart DIR\n";
    return 2;
  }
  const fs::path dir = argv[1];
  fs::create_directories(dir / "images");
  std::mt19937_64 gen(1);

  Dataset items;
  std::ofstream transcript(dir / "transcript.csv");
  transcript << "id,label\n";
  for (int i = 0; i < 90; ++i) {
    const int kind = i % 3;
    Item item;
    item.id = "shot" + std::to_string(i);
    item.image_path = dir / "images" / (item.id + ".pgm");
    item.bucket = "user" + std::to_string(i % 4);
    item.text = kWords[static_cast<std::size_t>(kind * 3 % 8)] + " " + kWords[(gen() % 8)];
    save_pnm(item.image_path, screen(kind, gen));
    items.push_back(item);
    transcript << item.id << ',' << kScreens[static_cast<std::size_t>(kind)] << '\n';
  }
  transcript.close();
  save_manifest(dir / "manifest.jsonl", items);
  {
    std::ofstream tax(dir / "taxonomy.txt");
    for (const auto& s : kScreens) tax << s << '\n';
    std::ofstream emb(dir / "embeddings.txt");
    std::normal_distribution<double> nd;
    for (const auto& w : kWords) {
      emb << w;
      for (int d = 0; d < 300; ++d) emb << ' ' << nd(gen);
      emb << '\n';
    }
  }

  FeaturizeConfig cfg;
  const auto raw = extract_features(items, cfg);
  const auto reduced = reduce_features(raw.matrix, cfg);
  std::cout << raw.items.size() << " screenshots, " << raw.matrix.cols() << " HOG features, " << reduced.kept
            << " principal components kept\n";

  const Workspace ws(raw.items, reduced.reduced.values, load_taxonomy(dir / "taxonomy.txt"));
  SessionStore store(ws, dir / "sessions");
  SessionConfig sc;
  sc.k = 3;
  sc.batch_size = 10;
  sc.iterations = 4;
  auto& session = store.get(store.create(sc));
  const auto answers = load_transcript(dir / "transcript.csv");
  run_simulated(session, simulated_oracle(answers, ws));
  write_metrics_csv(std::cout, session.metrics());
  return 0;
}
