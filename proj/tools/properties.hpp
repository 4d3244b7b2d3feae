#ifndef MARPO_TOOLS_PROPERTIES_HPP_
#define MARPO_TOOLS_PROPERTIES_HPP_

#include <cstddef>
#include <cstdint>
#include <string>

namespace marpo::props {

struct PropertyResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

PropertyResult estimator_unbiasedness(std::size_t pairs = 1000, std::uint64_t seed = 11);
PropertyResult estimator_shape(std::size_t triples = 10000, std::uint64_t seed = 12);
PropertyResult root_solving(std::size_t targets = 1000, std::uint64_t seed = 13);
PropertyResult ema_controller(std::size_t sequences = 10000, std::uint64_t seed = 14);

/// `fault` adds a relative error of 1e-3 to one analytic coordinate per batch.
PropertyResult gradient_checks(std::size_t batches = 20, std::uint64_t seed = 15,
                               bool fault = false);
PropertyResult mappo_reduction(std::size_t batches = 100, std::uint64_t seed = 16);
PropertyResult gae_oracle(std::size_t trajectories = 100, std::uint64_t seed = 17);

std::string format_line(const PropertyResult& result);

}  // namespace marpo::props

#endif  // MARPO_TOOLS_PROPERTIES_HPP_
