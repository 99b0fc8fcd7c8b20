#include <CLI11.hpp>
#include <iostream>

#include "mra/driver.hpp"
#include "mra/lanes.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Multi-resolution approximation for large spatial Gaussian process data"};
  std::string config;
  mra::RunOptions options;
  options.lanes = mra::available_lanes();
  std::string transport = "thread";
  std::string timing;

  app.add_option("config", config, "Parameter file")->required();
  app.add_option("-w,--workers", options.workers, "Number of workers")->check(CLI::PositiveNumber);
  app.add_option("-l,--lanes", options.lanes, "Parallel lanes per worker")->check(CLI::PositiveNumber);
  app.add_option("-t,--transport", transport, "Worker transport")->check(CLI::IsMember({"thread", "process"}));
  app.add_flag("-v,--verbose", options.verbose, "Print configuration and phase times");
  app.add_option("--timing-csv", timing, "Write phase times as CSV");
  app.add_option("-o,--output-dir", options.output_dir, "Directory for structure_information.txt");
  CLI11_PARSE(app, argc, argv);

  options.transport = mra::parse_transport_kind(transport);
  if (!timing.empty()) options.timing_csv = timing;
  return mra::run(config, options, std::cout, std::cerr);
}
