// Writes a deterministic synthetic corpus in the JSONL schema the trainer
// consumes. Sarcastic responses carry a marker token, so the set is
// separable and small models can memorize it quickly.

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "amr/data.hpp"

int main(int argc, char** argv) {
  CLI::App app{"synthetic corpus generator"};
  std::string out = "corpus.jsonl";
  int n = 200;
  int vocab = 50;
  int max_comment = 10;
  int max_response = 10;
  std::uint64_t seed = 1;
  app.add_option("--out", out, "output JSONL path");
  app.add_option("--n", n, "number of examples");
  app.add_option("--vocab", vocab, "filler vocabulary size");
  app.add_option("--max-comment", max_comment, "maximum comment length");
  app.add_option("--max-response", max_response, "maximum response length");
  app.add_option("--seed", seed, "generator seed");
  CLI11_PARSE(app, argc, argv);

  try {
    auto corpus = amr::make_synthetic_corpus(n, vocab, max_comment, max_response, seed);
    amr::write_corpus(out, corpus);
    std::cout << "wrote " << corpus.size() << " examples to " << out << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
