#include "nebp/types.hpp"

namespace nebp {

bool check_consistency(const std::vector<int>& object_oriented,
                       const std::vector<int>& measurement_oriented) {
  const int num_objects = static_cast<int>(object_oriented.size());
  const int num_measurements = static_cast<int>(measurement_oriented.size());
  for (int v : object_oriented)
    if (v < 0 || v > num_measurements)
      throw InputError("object-oriented entry out of range: " + std::to_string(v));
  for (int v : measurement_oriented)
    if (v < 0 || v > num_objects)
      throw InputError("measurement-oriented entry out of range: " + std::to_string(v));

  for (int i = 0; i < num_objects; ++i) {
    for (int j = 0; j < num_measurements; ++j) {
      const bool a_claims = object_oriented[i] == j + 1;
      const bool b_claims = measurement_oriented[j] == i + 1;
      if (a_claims != b_claims) return false;
    }
  }
  return true;
}

std::vector<int> measurement_oriented_from(const std::vector<int>& object_oriented,
                                           std::size_t num_measurements) {
  std::vector<int> b(num_measurements, 0);
  for (std::size_t i = 0; i < object_oriented.size(); ++i) {
    const int j = object_oriented[i];
    if (j < 0 || j > static_cast<int>(num_measurements))
      throw InputError("object-oriented entry out of range: " + std::to_string(j));
    if (j > 0) {
      if (b[static_cast<std::size_t>(j) - 1] != 0)
        throw InputError("object-oriented vector assigns one measurement twice");
      b[static_cast<std::size_t>(j) - 1] = static_cast<int>(i) + 1;
    }
  }
  return b;
}

std::vector<PotentialObject> promote_new_to_legacy(std::vector<PotentialObject> pos) {
  for (PotentialObject& po : pos) po.kind = PoKind::Legacy;
  return pos;
}

}  // namespace nebp
