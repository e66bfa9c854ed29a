#pragma once

#include "cellevac/scenario.hpp"

#include <string>

#ifndef CELLEVAC_DATA_DIR
#define CELLEVAC_DATA_DIR "data"
#endif

namespace testutil {

inline std::string data_path(const std::string& name) {
    return std::string(CELLEVAC_DATA_DIR) + "/" + name;
}

// 16 x 16 m square, four auto-generated cells, exits on the left and right
// edges. Small enough for brute-force oracles.
inline cellevac::Scenario square_scenario(int population = 0,
                                          const std::string& extra = "") {
    std::string cfg = R"({
      "name": "square",
      "boundary": [[0,0],[16,0],[16,16],[0,16]],
      "cell_width": 6.0,
      "exits": [
        {"id": 1, "width": 2.0, "segment": [[16,7],[16,9]], "entry_point": [14.0, 8.0]},
        {"id": 2, "width": 1.0, "segment": [[0,7.5],[0,8.5]], "entry_point": [2.0, 8.0]}
      ],
      "population": {"count": )" + std::to_string(population) + R"(, "speed_min": 1.24, "speed_max": 1.48}
      )" + extra + R"(,
      "limits": {"sim_time_cap_s": 900}
    })";
    return cellevac::load_scenario_from_string(cfg, "square");
}

} // namespace testutil
