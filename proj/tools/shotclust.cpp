#include <csignal>

#include "shotclust/cli.hpp"

int main(int argc, char** argv) {
  std::signal(SIGINT, [](int) { shotclust::cli::interrupted() = true; });
  std::signal(SIGTERM, [](int) { shotclust::cli::interrupted() = true; });
  return shotclust::cli::run(argc, argv);
}
