#include <doctest.h>

#include "mra/config.hpp"
#include "mra/errors.hpp"
#include "mra/partition.hpp"

using namespace mra;

namespace {

const std::string kBase =
    "DATA_FILE_NAME = data.bin\n"
    "NUM_PARTITIONS_J = 2\n"
    "NUM_KNOTS_r = 16\n"
    "NUM_LEVELS_M = 4\n";

std::string with(const std::string& extra) { return kBase + extra; }

}  // namespace

TEST_CASE("likelihood config") {
  const Config c = parse_config_text(with("CALCULATION_MODE = likelihood\nALPHA = 2\nBETA = 0.5\nTAU = 0 # nugget\n"));
  CHECK(c.mode == CalculationMode::likelihood);
  CHECK(c.params == CovarianceParams{2.0, 0.5, 0.0});
  CHECK(c.partitions == 2);
  CHECK(c.knots == 16);
  CHECK(c.levels == 4);
  CHECK(c.offset == kDefaultOffset);
  CHECK_FALSE(c.dynamic_schedule);
  CHECK_FALSE(c.eliminate_duplicates);
}

TEST_CASE("defaults and quoting") {
  const Config c = parse_config_text(
      "DATA_FILE_NAME = \"my data.bin\"\nNUM_PARTITIONS_J = 4\nNUM_KNOTS_r = 9\nNUM_LEVELS_M = default\n"
      "OFFSET = default\nCALCULATION_MODE = build_structure_only\nDYNAMIC_SCHEDULE_FLAG = true\n");
  CHECK(c.data_file == "my data.bin");
  CHECK_FALSE(c.levels.has_value());
  CHECK(c.dynamic_schedule);
  CHECK(c.mode == CalculationMode::build_structure_only);
}

TEST_CASE("config errors name the key") {
  const auto message = [](const std::string& text) {
    try {
      parse_config_text(text, "test.cfg");
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message(with("CALCULATION_MODE = likelihood\nALPHA = 1\nBETA = 1\n")).find("TAU") != std::string::npos);
  CHECK(message(with("CALCULATION_MODE = fastest\n")).find("CALCULATION_MODE") != std::string::npos);
  CHECK(message(kBase + "NUM_PARTITIONS_J = 3\n").find("duplicate") != std::string::npos);
  CHECK(message("DATA_FILE_NAME = d\nNUM_PARTITIONS_J = 3\nNUM_KNOTS_r = 4\nNUM_LEVELS_M = 2\n"
                "CALCULATION_MODE = build_structure_only\n")
            .find("requires to be either 2 or 4") != std::string::npos);
  CHECK(message(with("CALCULATION_MODE = likelihood\nALPHA = -1\nBETA = 1\nTAU = 0\n")).find("ALPHA") !=
        std::string::npos);
  CHECK(message(with("BOGUS = 1\n")).find("BOGUS") != std::string::npos);
  CHECK(message(with("CALCULATION_MODE = likelihood\nALPHA = x\nBETA = 1\nTAU = 0\n")).find("test.cfg:") !=
        std::string::npos);
  CHECK(message(with("CALCULATION_MODE = build_structure_only\nPRINT_DETAIL_FLAG = yes\n"))
            .find("PRINT_DETAIL_FLAG") != std::string::npos);
  CHECK(message(with("CALCULATION_MODE = build_structure_only\nSAVE_TO_DISK_FLAG = true\n"))
            .find("TMP_DIRECTORY") != std::string::npos);
  CHECK_THROWS_AS(parse_config("/nonexistent/config.txt"), Error);
}

TEST_CASE("prediction config requirements") {
  const std::string base = with("CALCULATION_MODE = prediction\nALPHA = 1\nBETA = 1\nTAU = 0.1\n");
  CHECK_THROWS_AS(parse_config_text(base), ConfigError);
  const Config c = parse_config_text(base + "PREDICTION_LOCATION_MODE = N\n");
  CHECK(c.location_mode == LocationMode::nan_values);
  CHECK_THROWS_AS(parse_config_text(base + "PREDICTION_LOCATION_MODE = A\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(base + "PREDICTION_LOCATION_MODE = D\nDUMP_PREDICTION_RESULTS_FLAG = true\n"),
                  ConfigError);
  const Config d = parse_config_text(base +
                                     "PREDICTION_LOCATION_MODE = A\nPREDICTION_LOCATION_FILE = loc.bin\n"
                                     "DUMP_PREDICTION_RESULTS_FLAG = true\nPREDICTION_RESULTS_FILE_NAME = out\n");
  CHECK(d.location_file == "loc.bin");
  CHECK(d.results_file == "out");
}

TEST_CASE("optimization config") {
  const std::string text = with(
      "CALCULATION_MODE = optimization\nMAX_ITERATIONS = 50\n"
      "ALPHA_LOWER_BOUND = 0.1\nALPHA_UPPER_BOUND = 10\nALPHA_INITIAL_GUESS = 1\n"
      "BETA_LOWER_BOUND = 0.01\nBETA_UPPER_BOUND = 5\nBETA_INITIAL_GUESS = 0.2\n"
      "TAU_LOWER_BOUND = 0\nTAU_UPPER_BOUND = 1\nTAU_INITIAL_GUESS = 0.1\n");
  const Config c = parse_config_text(text);
  CHECK(c.max_iterations == 50);
  CHECK(c.lower_bound.tau == 0.0);
  CHECK(c.upper_bound.beta == 5.0);
  CHECK(c.initial_guess.alpha == 1.0);

  std::string bad = text;
  bad.replace(bad.find("ALPHA_INITIAL_GUESS = 1"), 23, "ALPHA_INITIAL_GUESS = 20");
  CHECK_THROWS_AS(parse_config_text(bad), ConfigError);
}
