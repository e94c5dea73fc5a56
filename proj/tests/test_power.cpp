#include <gtest/gtest.h>

#include "sparclora/power.hpp"

using namespace sparclora;

TEST(EnergyLedger, SleepHundredSeconds) {
  EnergyLedger ledger(NodeAddress{1}, PowerMode::sleep, SimTime{0});
  ledger.record_transition(PowerMode::idle, SimTime{100s});
  EXPECT_NEAR(ledger.total_mj(), 59.4, 1e-9);
}

TEST(EnergyLedger, ZeroLengthSegment) {
  EnergyLedger ledger(NodeAddress{1}, PowerMode::active, SimTime{5s});
  ledger.record_transition(PowerMode::sleep, SimTime{5s});
  EXPECT_EQ(ledger.total_mj(), 0.0);
  ASSERT_EQ(ledger.segments().size(), 1u);
}

TEST(EnergyLedger, OneReportEvent) {
  EnergyLedger ledger(NodeAddress{1}, PowerMode::sleep, SimTime{0});
  ledger.record_transition(PowerMode::idle, SimTime{10s});
  ledger.record_transition(PowerMode::active, SimTime{11s});
  ledger.record_transition(PowerMode::sleep, SimTime{23s});
  const double sleep_part = 0.594 * 10;
  EXPECT_NEAR(ledger.total_mj() - sleep_part, 2999.7, 1e-9);
}

TEST(EnergyLedger, RejectsTimeRegression) {
  EnergyLedger ledger(NodeAddress{1}, PowerMode::sleep, SimTime{10s});
  try {
    ledger.record_transition(PowerMode::idle, SimTime{9s});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::time_regression);
  }
}

TEST(EnergyLedger, TotalEqualsSegmentSum) {
  EnergyLedger ledger(NodeAddress{1}, PowerMode::sleep, SimTime{0});
  std::int64_t t = 0;
  const PowerMode cycle[] = {PowerMode::idle, PowerMode::active, PowerMode::sleep};
  for (int i = 0; i < 300; ++i) {
    t += 1 + (i * 7919) % 100'000'000;
    ledger.record_transition(cycle[i % 3], SimTime{t});
  }
  ledger.finish(SimTime{t + 5});
  double sum = 0;
  for (const auto& s : ledger.segments())
    sum += ModePowers{}.draw_mw(s.mode) * static_cast<double>((s.end - s.start).count()) / 1e6;
  EXPECT_NEAR(ledger.total_mj(), sum, 1e-9 * sum);
  EXPECT_THROW(ledger.record_transition(PowerMode::idle, SimTime{t + 10}), Error);
}

TEST(EventEnergy, Examples) {
  EXPECT_NEAR(event_energy(1, 12), 2999.7, 2999.7 * 1e-12);
  EXPECT_EQ(event_energy(0, 0), 0.0);
  EXPECT_NEAR(event_energy(1, 0), 29.7, 1e-12);
}

TEST(Battery, EnergyAndValidation) {
  EXPECT_NEAR((BatterySpec{1000, 3.7, 1.0}.energy_j()), 13320.0, 1e-9);
  EXPECT_NEAR(BatterySpec{}.energy_j(), 11322.0, 1e-9);
  EXPECT_THROW((BatterySpec{1000, 3.7, 0.0}.validate()), Error);
  EXPECT_THROW((BatterySpec{-1, 3.7, 0.5}.validate()), Error);
}

TEST(Lifetime, DefaultBatteryTenEventsPerDay) {
  const double days = estimate_lifetime_days({1000, 3.7, 1.0}, 10, 2999.7, 0.594);
  // 13320 J / (51.3216 J + 29.997 J) per day
  EXPECT_NEAR(days, 13320.0 / 81.3186, 1e-9);
  EXPECT_NEAR(days, 163.8, 0.05);
}

TEST(Lifetime, LimitsAndMonotonicity) {
  const BatterySpec b{1000, 3.7, 1.0};
  EXPECT_NEAR(estimate_lifetime_days(b, 0, 2999.7, 0.594), 13320.0 / 51.3216, 1e-9);
  EXPECT_NEAR(estimate_lifetime_days({2000, 3.7, 1.0}, 10, 2999.7, 0.594),
              2 * estimate_lifetime_days(b, 10, 2999.7, 0.594), 1e-9);
  double prev = estimate_lifetime_days(b, 0, 2999.7, 0.594);
  for (double rate : {1.0, 5.0, 10.0, 100.0, 1000.0}) {
    const double d = estimate_lifetime_days(b, rate, 2999.7, 0.594);
    EXPECT_LT(d, prev);
    prev = d;
  }
}
