#include "chor/logging.hpp"
#include "chor_tools/cli.hpp"

int main(int argc, char** argv) {
  chor::configure_logging_from_env();
  return chor::cli::run(argc, argv);
}
