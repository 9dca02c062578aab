#include "psipde/fftw_lock.hpp"

namespace psipde {

std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace psipde
