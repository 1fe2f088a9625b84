#pragma once

#include "geolens/dataset/table.hpp"
#include "geolens/regression/model.hpp"

namespace geolens::regression {

/// Standardizes, builds the neighbour index and dispatches on the family.
CalibratedModel calibrate(const dataset::GeoFeatureTable& table, const ModelSpec& spec, const ProgressFn& progress = {});

}  // namespace geolens::regression
