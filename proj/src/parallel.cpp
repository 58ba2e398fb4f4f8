#include "coopscene/parallel.hpp"

#include <cstdlib>
#include <string>

namespace coopscene {

int resolve_workers(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("COOPSCENE_WORKERS")) {
    try {
      const int value = std::stoi(env);
      if (value > 0) return value;
    } catch (const std::exception&) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace coopscene
