#ifndef ELIS_SIM_TIME_H_
#define ELIS_SIM_TIME_H_

#include <compare>
#include <limits>

namespace elis {

// Simulated time in milliseconds. Fractional values are allowed; the value
// is never negative inside a run.
class SimTime {
 public:
  constexpr SimTime() = default;
  constexpr explicit SimTime(double ms) : ms_(ms) {}

  static constexpr SimTime FromSeconds(double s) { return SimTime(s * 1000.0); }
  static constexpr SimTime Zero() { return SimTime(0.0); }
  static constexpr SimTime Infinite() {
    return SimTime(std::numeric_limits<double>::infinity());
  }

  constexpr double ms() const { return ms_; }
  constexpr double seconds() const { return ms_ / 1000.0; }

  constexpr SimTime& operator+=(SimTime other) {
    ms_ += other.ms_;
    return *this;
  }
  friend constexpr SimTime operator+(SimTime a, SimTime b) {
    return SimTime(a.ms_ + b.ms_);
  }
  friend constexpr SimTime operator-(SimTime a, SimTime b) {
    return SimTime(a.ms_ - b.ms_);
  }
  friend constexpr auto operator<=>(SimTime, SimTime) = default;

 private:
  double ms_ = 0.0;
};

}  // namespace elis

#endif  // ELIS_SIM_TIME_H_
