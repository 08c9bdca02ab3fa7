#include "hydrosdp/stochastic.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace hydro {

namespace {

std::uint64_t splitmix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr double kPi = 3.14159265358979323846;

}  // namespace

RandomStream::RandomStream(std::uint64_t seed) : engine_(splitmix(seed)) {}

RandomStream RandomStream::derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return RandomStream(splitmix(splitmix(splitmix(seed) ^ a) ^ (b * 0x632be59bd9b4e019ULL)));
}

double RandomStream::normal() {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(engine_);
}

double RandomStream::uniform() {
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  return dist(engine_);
}

void validate_params(const StochasticParams& p, int num_reservoirs) {
  const int weeks = p.num_weeks();
  if (weeks < 1) throw ValidationError("weekly_price_mean is empty");
  if (static_cast<int>(p.hourly_profile.size()) != kHoursPerWeek) {
    throw ValidationError("hourly_profile needs 168 entries");
  }
  const double mean =
      std::accumulate(p.hourly_profile.begin(), p.hourly_profile.end(), 0.0) / kHoursPerWeek;
  if (std::abs(mean - 1.0) > 1e-9) throw ValidationError("hourly_profile must average to 1");
  for (double f : p.hourly_profile) {
    if (!(f >= 0.0)) throw ValidationError("hourly_profile entries must be >= 0");
  }
  for (double c : p.weekly_price_mean) {
    if (!(c >= 0.0) || !std::isfinite(c)) throw ValidationError("weekly prices must be finite and >= 0");
  }
  if (!(p.price_sigma >= 0.0) || !(p.inflow_sigma >= 0.0) || !(p.daily_price_sigma >= 0.0)) {
    throw ValidationError("volatilities must be >= 0");
  }
  if (!(std::abs(p.rho) <= 1.0)) throw ValidationError("rho must lie in [-1, 1]");
  if (!(p.daily_price_persistence >= 0.0 && p.daily_price_persistence <= 1.0)) {
    throw ValidationError("daily price persistence must lie in [0, 1]");
  }
  if (static_cast<int>(p.inflow_mean.size()) != num_reservoirs) {
    throw ValidationError("inflow_mean needs one row per reservoir");
  }
  for (const auto& row : p.inflow_mean) {
    if (static_cast<int>(row.size()) != weeks) throw ValidationError("inflow_mean rows need one entry per week");
    for (double a : row) {
      if (!(a >= 0.0) || !std::isfinite(a)) throw ValidationError("inflows must be finite and >= 0");
    }
  }
  if (static_cast<int>(p.reserve_price.size()) != weeks) {
    throw ValidationError("reserve_price needs one entry per week");
  }
  for (double c : p.reserve_price) {
    if (!(c >= 0.0) || !std::isfinite(c)) throw ValidationError("reserve prices must be finite and >= 0");
  }
}

StochasticParams reference_params(const PlantTopology& plant) {
  StochasticParams p;
  p.weekly_price_mean.resize(kWeeksPerYear);
  p.reserve_price.resize(kWeeksPerYear);
  for (int w = 0; w < kWeeksPerYear; ++w) {
    const double season = std::cos(2.0 * kPi * w / kWeeksPerYear);  // +1 in January
    p.weekly_price_mean[w] = 50.0 + 12.0 * season;
    p.reserve_price[w] = 18.0 + 6.0 * season;
  }
  p.hourly_profile.resize(kHoursPerWeek);
  for (int h = 0; h < kHoursPerWeek; ++h) {
    const int day = h / 24, hod = h % 24;
    double f = 0.7;
    if (hod >= 7 && hod < 9) f = 0.95;
    if (hod >= 9 && hod < 13) f = 1.3;
    if (hod >= 13 && hod < 17) f = 1.15;
    if (hod >= 17 && hod < 21) f = 1.35;
    if (hod >= 21) f = 0.85;
    if (day >= 5) f = 0.6 + 0.5 * (f - 0.7);
    p.hourly_profile[h] = f;
  }
  const double mean = std::accumulate(p.hourly_profile.begin(), p.hourly_profile.end(), 0.0) / kHoursPerWeek;
  for (auto& f : p.hourly_profile) f /= mean;

  p.inflow_mean.assign(plant.reservoirs.size(), std::vector<double>(kWeeksPerYear, 0.0));
  for (std::size_t r = 0; r < plant.reservoirs.size(); ++r) {
    if (!plant.is_inflow_point(static_cast<int>(r))) continue;
    const bool seasonal = plant.reservoirs[r].kind == ReservoirClass::seasonal;
    for (int w = 0; w < kWeeksPerYear; ++w) {
      const double melt = std::exp(-std::pow((w - 25.0) / 6.0, 2.0));
      p.inflow_mean[r][w] = seasonal ? 1.5e6 + 10e6 * melt : 0.1e6 + 0.3e6 * melt;
    }
  }
  p.price_sigma = 0.2;
  p.inflow_sigma = 0.3;
  p.rho = -0.5;
  p.daily_price_sigma = 0.15;
  return p;
}

double WeeklyScenario::weekly_inflow(int reservoir) const {
  const auto& a = inflows.at(reservoir);
  return std::accumulate(a.begin(), a.end(), 0.0);
}

namespace {

WeeklyScenario make_week(const StochasticParams& p, int week, double price_shock, double inflow_shock) {
  if (week < 1 || week > p.num_weeks()) throw std::out_of_range("week " + std::to_string(week) + " out of range");
  const int w = week - 1;
  WeeklyScenario s;
  s.prices.resize(kHoursPerWeek);
  const double level = p.weekly_price_mean[w] * price_shock;
  for (int h = 0; h < kHoursPerWeek; ++h) s.prices[h] = std::max(0.0, level * p.hourly_profile[h]);
  s.inflows.resize(p.inflow_mean.size());
  for (std::size_t r = 0; r < p.inflow_mean.size(); ++r) {
    s.inflows[r].assign(kHoursPerWeek, p.inflow_mean[r][w] * inflow_shock / kHoursPerWeek);
  }
  s.reserve_price = p.reserve_price[w];
  s.probability = 1.0;
  return s;
}

}  // namespace

WeeklyScenario sample_week(const StochasticParams& p, int week, RandomStream& stream) {
  const double z1 = stream.normal();
  const double z2 = stream.normal();
  const double zp = z1;
  const double zi = p.rho * z1 + std::sqrt(std::max(0.0, 1.0 - p.rho * p.rho)) * z2;
  const double sp = p.price_sigma, si = p.inflow_sigma;
  return make_week(p, week, std::exp(sp * zp - 0.5 * sp * sp), std::exp(si * zi - 0.5 * si * si));
}

WeeklyScenario expected_week(const StochasticParams& p, int week) { return make_week(p, week, 1.0, 1.0); }

WeeklyScenario scale_prices(WeeklyScenario s, double factor) {
  for (auto& c : s.prices) c *= factor;
  s.reserve_price *= factor;
  return s;
}

ScenarioTree::ScenarioTree(int hours_per_day, std::vector<int> branching,
                           std::vector<std::vector<double>> node_prices,
                           std::vector<std::vector<double>> inflows, double reserve_price)
    : hours_per_day_(hours_per_day),
      branching_(std::move(branching)),
      inflows_(std::move(inflows)),
      reserve_price_(reserve_price) {
  if (hours_per_day_ < 1 || branching_.empty()) throw std::invalid_argument("tree needs at least one hour");
  constexpr long long kMaxNodes = 50'000'000;
  long long bundles = 1, total = 0;
  for (int b : branching_) {
    if (b < 1) throw std::invalid_argument("branching factors must be >= 1");
    bundles *= b;
    total += bundles * hours_per_day_;
    if (bundles > kMaxNodes || total > kMaxNodes) throw std::length_error("scenario tree too large to allocate");
    day_bundles_.push_back(static_cast<int>(bundles));
  }
  num_scenarios_ = static_cast<int>(bundles);
  const int hours = num_hours();
  if (static_cast<int>(node_prices.size()) != hours) throw std::invalid_argument("node_prices needs one row per hour");
  for (const auto& a : inflows_) {
    if (static_cast<int>(a.size()) != hours) throw std::invalid_argument("inflows need one value per hour");
  }
  nodes_.reserve(static_cast<std::size_t>(total));
  stage_start_.push_back(0);
  for (int h = 0; h < hours; ++h) {
    const int d = h / hours_per_day_;
    const int nb = day_bundles_[d];
    if (static_cast<int>(node_prices[h].size()) != nb) {
      throw std::invalid_argument("node_prices row " + std::to_string(h) + " has the wrong bundle count");
    }
    const int size = num_scenarios_ / nb;
    for (int b = 0; b < nb; ++b) {
      Node n;
      n.hour = h;
      if (h > 0) {
        const int pb = (h % hours_per_day_ != 0) ? b : b / branching_[d];
        n.parent = stage_start_[h - 1] + pb;
      }
      n.first_scenario = b * size;
      n.num_scenarios = size;
      n.probability = static_cast<double>(size) / num_scenarios_;
      n.price = node_prices[h][b];
      nodes_.push_back(n);
    }
    stage_start_.push_back(static_cast<int>(nodes_.size()));
  }
}

int ScenarioTree::node_of(int hour, int scenario) const {
  const int nb = day_bundles_.at(hour / hours_per_day_);
  return stage_start_[hour] + scenario / (num_scenarios_ / nb);
}

WeeklyScenario ScenarioTree::scenario(int s) const {
  if (s < 0 || s >= num_scenarios_) throw std::out_of_range("scenario index out of range");
  WeeklyScenario w;
  const int hours = num_hours();
  w.prices.resize(hours);
  for (int h = 0; h < hours; ++h) w.prices[h] = nodes_[node_of(h, s)].price;
  w.inflows = inflows_;
  w.reserve_price = reserve_price_;
  w.probability = scenario_probability(s);
  return w;
}

void ScenarioTree::check_structure() const {
  const int hours = num_hours();
  for (int h = 0; h < hours; ++h) {
    // Partition: contiguous ranges covering every scenario once, summing to 1.
    int next = 0;
    double prob = 0.0;
    for (int i = stage_begin(h); i < stage_begin(h + 1); ++i) {
      const auto& n = nodes_[i];
      if (n.hour != h || n.first_scenario != next || n.num_scenarios < 1) {
        throw std::logic_error("bundles at hour " + std::to_string(h) + " do not partition the scenarios");
      }
      next += n.num_scenarios;
      prob += n.probability;
      if (h > 0) {
        const auto& p = nodes_.at(n.parent);
        if (p.hour != h - 1 || n.first_scenario < p.first_scenario ||
            n.first_scenario + n.num_scenarios > p.first_scenario + p.num_scenarios) {
          throw std::logic_error("bundle at hour " + std::to_string(h) + " does not refine its parent");
        }
      }
    }
    if (next != num_scenarios_ || std::abs(prob - 1.0) > 1e-9) {
      throw std::logic_error("bundles at hour " + std::to_string(h) + " do not cover all scenarios");
    }
    if (h % hours_per_day_ != 0 && bundles_at(h) != bundles_at(h - 1)) {
      throw std::logic_error("branching inside a day at hour " + std::to_string(h));
    }
  }
}

ScenarioTree degenerate_tree(const WeeklyScenario& s) {
  std::vector<std::vector<double>> prices(s.prices.size());
  for (std::size_t h = 0; h < s.prices.size(); ++h) prices[h] = {s.prices[h]};
  return ScenarioTree(s.num_hours(), {1}, std::move(prices), s.inflows, s.reserve_price);
}

ScenarioTree build_price_tree(const WeeklyScenario& base, int branching, double daily_sigma, int hours_per_day,
                              double persistence) {
  if (branching < 1) throw std::invalid_argument("branching must be >= 1");
  const int hours = base.num_hours();
  if (hours_per_day < 1 || hours % hours_per_day != 0) {
    throw std::invalid_argument("week length must be a whole number of days");
  }
  const int days = hours / hours_per_day;
  long long leaves = 1;
  for (int d = 0; d < days; ++d) {
    leaves *= branching;
    if (leaves > 50'000'000) throw std::length_error("scenario tree too large to allocate");
  }

  // Quantile-sampled mean-one shocks.
  std::vector<double> shock(branching, 1.0);
  if (branching > 1) {
    const boost::math::normal_distribution<double> phi;
    double sum = 0.0;
    for (int i = 0; i < branching; ++i) {
      const double z = boost::math::quantile(phi, (i + 0.5) / branching);
      shock[i] = std::exp(daily_sigma * z);
      sum += shock[i];
    }
    for (auto& x : shock) x *= branching / sum;
  }

  std::vector<std::vector<double>> prices(hours);
  std::vector<double> mult{1.0};
  for (int d = 0; d < days; ++d) {
    std::vector<double> next(mult.size() * branching);
    for (std::size_t b = 0; b < next.size(); ++b) {
      const double parent = persistence == 1.0 ? mult[b / branching] : std::pow(mult[b / branching], persistence);
      next[b] = parent * shock[b % branching];
    }
    mult = std::move(next);
    for (int h = d * hours_per_day; h < (d + 1) * hours_per_day; ++h) {
      prices[h].resize(mult.size());
      for (std::size_t b = 0; b < mult.size(); ++b) prices[h][b] = base.prices[h] * mult[b];
    }
  }
  return ScenarioTree(hours_per_day, std::vector<int>(days, branching), std::move(prices), base.inflows,
                      base.reserve_price);
}

ScenarioTree build_price_tree(const StochasticParams& params, int week, int branching, RandomStream& stream) {
  if (branching < 1) throw std::invalid_argument("branching must be >= 1");
  return build_price_tree(sample_week(params, week, stream), branching, params.daily_price_sigma, 24,
                          params.daily_price_persistence);
}

std::vector<bool> default_peak_mask() {
  std::vector<bool> mask(kHoursPerWeek, false);
  for (int h = 0; h < kHoursPerWeek; ++h) {
    const int day = h / 24, hod = h % 24;
    mask[h] = day < 5 && hod >= 8 && hod < 20;
  }
  return mask;
}

std::pair<double, double> aggregate_peak_offpeak(const WeeklyScenario& s, const std::vector<bool>& peak_mask) {
  if (peak_mask.size() != s.prices.size()) throw std::invalid_argument("peak mask length differs from the week");
  double peak = 0.0, off = 0.0;
  int n_peak = 0, n_off = 0;
  for (std::size_t h = 0; h < s.prices.size(); ++h) {
    if (peak_mask[h]) {
      peak += s.prices[h];
      ++n_peak;
    } else {
      off += s.prices[h];
      ++n_off;
    }
  }
  if (n_peak == 0 || n_off == 0) throw std::invalid_argument("peak mask must be neither empty nor full");
  return {peak / n_peak, off / n_off};
}

PriceDurationCurve::PriceDurationCurve(std::vector<double> prices) : sorted_(std::move(prices)) {
  if (sorted_.empty()) throw std::invalid_argument("price duration curve needs at least one price");
  std::sort(sorted_.begin(), sorted_.end(), std::greater<>());
  prefix_.assign(sorted_.size() + 1, 0.0);
  for (std::size_t i = 0; i < sorted_.size(); ++i) prefix_[i + 1] = prefix_[i] + sorted_[i];
}

double PriceDurationCurve::at(double t) const {
  if (!(t >= 0.0 && t <= duration())) throw std::out_of_range("duration outside the curve");
  const auto i = std::min(static_cast<std::size_t>(t), sorted_.size() - 1);
  return sorted_[i];
}

double PriceDurationCurve::integral(double a, double b) const {
  if (!(a >= 0.0 && a <= b && b <= duration())) throw std::out_of_range("integration bounds outside the curve");
  auto mass = [this](double t) {
    const auto i = static_cast<std::size_t>(t);
    if (i >= sorted_.size()) return prefix_.back();
    return prefix_[i] + (t - static_cast<double>(i)) * sorted_[i];
  };
  return mass(b) - mass(a);
}

PriceDurationCurve make_pdc(const WeeklyScenario& s) { return PriceDurationCurve(s.prices); }

double pdc_integral(const PriceDurationCurve& pdc, double a, double b) { return pdc.integral(a, b); }

}  // namespace hydro
