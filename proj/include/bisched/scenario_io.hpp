#pragma once

#include "bisched/model.hpp"

#include <iosfwd>
#include <string>

namespace bisched {

/// Flat `key = value` scenario files. Blank lines and `#` comments are
/// ignored; values may be double-quoted. Keys:
///
///   name, bound, theta (d*d numbers, row-major; zeros if omitted)
///   noise.kind (gaussian|uniform), noise.scale
///   job.<i>.feature, job.<i>.arrival_rate, job.<i>.service_rate,
///   job.<i>.weight, job.<i>.holding_cost
///   server.<j>.feature, server.<j>.capacity
///   reward_table.mean, reward_table.variance, reward_table.count (I*J, row-major)
///   capacity_schedule (rows of J integers separated by ';')
///   config.V, config.gamma, config.zeta, config.horizon, config.seed,
///   config.switch_threshold, config.kappa, config.policy
///
/// Class ids must be contiguous from 0. Parsing does not validate the
/// model constraints; call validate() for that.
Scenario read_scenario(std::istream& in);
Scenario load_scenario(const std::string& path);

void write_scenario(std::ostream& out, const Scenario& scenario);
void save_scenario(const std::string& path, const Scenario& scenario);

}  // namespace bisched
