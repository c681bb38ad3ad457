#include "nebp/kernels.hpp"

#include <cstdlib>
#include <stdexcept>

namespace nebp::kernels {
namespace {

const Ops* pick_default() {
#if defined(__x86_64__) || defined(_M_X64)
  if (__builtin_cpu_supports("avx2")) {
    if (const Ops* o = avx2_ops()) return o;
  }
#endif
  if (const Ops* o = neon_ops()) return o;
  return &scalar_ops();
}

const Ops* resolve(const std::string& name) {
  if (name == "scalar") return &scalar_ops();
  if (name == "avx2") {
#if defined(__x86_64__) || defined(_M_X64)
    if (__builtin_cpu_supports("avx2")) return avx2_ops();
#endif
    return nullptr;
  }
  if (name == "neon") return neon_ops();
  throw std::invalid_argument("unknown kernel variant: " + name);
}

const Ops*& active_slot() {
  static const Ops* slot = [] {
    if (const char* env = std::getenv("NEBP_KERNELS")) {
      const Ops* o = resolve(env);
      if (o == nullptr)
        throw std::invalid_argument(std::string("NEBP_KERNELS variant unsupported: ") +
                                    env);
      return o;
    }
    return pick_default();
  }();
  return slot;
}

}  // namespace

const Ops& active() { return *active_slot(); }

void force(const std::string& name) {
  const Ops* o = resolve(name);
  if (o == nullptr) throw std::invalid_argument("kernel variant unsupported: " + name);
  active_slot() = o;
}

std::vector<std::string> available() {
  std::vector<std::string> out = {"scalar"};
#if defined(__x86_64__) || defined(_M_X64)
  if (__builtin_cpu_supports("avx2") && avx2_ops() != nullptr) out.emplace_back("avx2");
#endif
  if (neon_ops() != nullptr) out.emplace_back("neon");
  return out;
}

}  // namespace nebp::kernels
