#pragma once

#include <optional>
#include <string>

#include "esfbma/weights.hpp"

namespace esfbma {

// GAL neighbor-list text format:
//   header            0 <n> <dataset-name> <id-field>
//   per unit          <unit_id> <neighbor_count>
//                     <neighbor ids separated by spaces>   (empty line if 0)
// Non-binary weights travel in a sidecar CSV "unit_id,neighbor_id,weight_raw";
// without a sidecar all weights are 1.
NeighborList parse_neighbor_file(
    const std::string& gal_text,
    const std::optional<std::string>& sidecar_csv = std::nullopt);

// Inverse of parse_neighbor_file. When the list carries non-binary weights the
// sidecar output must be provided.
std::string serialize_neighbor_file(const NeighborList& nl,
                                    std::string* sidecar_csv_out = nullptr,
                                    const std::string& dataset_name = "dataset",
                                    const std::string& id_field = "unit_id");

}  // namespace esfbma
