#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "mobiscope/core.hpp"

namespace mobiscope::santiago {

/// Mobility-score archetype used by the synthetic city: 0 rural-low, 1 low, 2 mid, 3 high.
enum class ScoreBand { rural_low = 0, low = 1, mid = 2, high = 3 };

struct ReferenceCommune {
    Commune commune;
    ScoreBand band;
};

/// The 52 communes of the Santiago Metropolitan Region keyed by their official commune
/// codes. Populations and income indices are rounded approximations used as simulation
/// defaults only.
const std::vector<ReferenceCommune>& communes();

/// Commune code for a name ("Las Condes" -> "13114"). Throws LookupError.
std::string id_of(std::string_view name);

/// The 2020 confinement timeline (partial lockdowns from March 26, total lockdown from
/// mid-May, staggered phase 2 transitions from July 28 to September 28). Sector-level
/// partial lockdowns such as "Puente Alto (West)" are coded for the whole commune.
InterventionSchedule schedule_2020();

}  // namespace mobiscope::santiago
