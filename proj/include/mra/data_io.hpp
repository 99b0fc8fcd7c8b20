#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mra/geometry.hpp"

namespace mra {

/// Column-oriented observation table. Values may be NaN (prediction placeholders).
struct ObservationSet {
  std::vector<double> lon;
  std::vector<double> lat;
  std::vector<double> value;

  std::size_t size() const { return lon.size(); }
  Point location(std::size_t i) const { return {lon[i], lat[i]}; }
  PointList locations() const;
};

/// Data file: u64 count n, then n lon, n lat, n values (little-endian f64).
ObservationSet read_observations(const std::string& path, bool deduplicate);
void write_observations(const std::string& path, const ObservationSet& data);

/// Keeps the first occurrence of every coordinate pair. Returns the number dropped.
std::size_t deduplicate(ObservationSet& data);

/// Location file: u64 count, then lon block, lat block.
PointList read_locations(const std::string& path);
void write_locations(const std::string& path, const PointList& points);

enum class LocationMode { nan_values, data_file, location_file };
LocationMode parse_location_mode(const std::string& text);

/// N: NaN-valued rows; D: every row; A: the contents of `location_file`.
PointList resolve_prediction_locations(LocationMode mode, const ObservationSet& data,
                                       const std::string& location_file = {});

/// Rows with a non-NaN value, in input order.
ObservationSet observed_rows(const ObservationSet& data);

struct PredictionResults {
  PointList locations;
  std::vector<double> mean;
  std::vector<double> variance;

  std::size_t size() const { return locations.size(); }
};

/// `stem` + "_" + worker index.
std::string prediction_file_name(const std::string& stem, int worker);
/// u64 count, then lon, lat, mean, variance blocks.
void write_predictions(const std::string& path, const PredictionResults& results);
PredictionResults read_predictions(const std::string& path);

}  // namespace mra
