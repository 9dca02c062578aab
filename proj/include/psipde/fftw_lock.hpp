#pragma once

#include <mutex>

namespace psipde {

// FFTW's planner is not thread-safe; plan creation and destruction take this lock.
std::mutex& fftw_planner_mutex();

}  // namespace psipde
