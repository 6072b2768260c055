#include "dolce/config.hpp"
#include "dolce/error.hpp"

#include <doctest.h>

#include <string>

using namespace dolce;

TEST_SUITE("config") {
  TEST_CASE("INI sections set fields") {
    RunConfig c;
    apply_ini(c, "[synth]\nn = 250\nr = 0.4\n[nuisance]\nfolds = 3\n[sweep]\ngrid = 0, 0.5\nestimators = IPS,DOLCE\n");
    CHECK(c.synth.n == 250);
    CHECK(c.synth.violation_ratio == 0.4);
    CHECK(c.nuisance.num_folds == 3);
    CHECK(c.grid == std::vector<double>{0.0, 0.5});
    CHECK(c.estimators == std::vector<std::string>{"IPS", "DOLCE"});
  }

  TEST_CASE("every unknown key is reported in one error") {
    RunConfig c;
    try {
      apply_ini(c, "[synth]\nn = 10\nbogus = 1\n[train]\nwhat = 2\n");
      FAIL("expected InvalidConfig");
    } catch (const InvalidConfig& e) {
      const std::string m = e.what();
      CHECK(m.find("synth.bogus") != std::string::npos);
      CHECK(m.find("train.what") != std::string::npos);
    }
    try {
      apply_overrides(c, {"synth.n=5", "synth.zzz=1", "nope.x=2"});
      FAIL("expected InvalidConfig");
    } catch (const InvalidConfig& e) {
      const std::string m = e.what();
      CHECK(m.find("synth.zzz") != std::string::npos);
      CHECK(m.find("nope.x") != std::string::npos);
    }
  }

  TEST_CASE("overrides apply in order and reject bad values") {
    RunConfig c;
    apply_overrides(c, {"synth.r=0.2", "synth.r=0.7", "train.dolce_reward=mtri"});
    CHECK(c.synth.violation_ratio == 0.7);
    CHECK(c.train.dolce_reward == RewardModelKind::Mtri);
    CHECK_THROWS_AS(apply_overrides(c, {"synth.n=abc"}), InvalidConfig);
    CHECK_THROWS_AS(apply_overrides(c, {"synth.n"}), InvalidConfig);
    CHECK_THROWS_AS(apply_setting(c, "train.dolce_reward", "other"), InvalidConfig);
  }

  TEST_CASE("hash is stable and tracks settings") {
    RunConfig a, b;
    CHECK(config_hash(a) == config_hash(b));
    CHECK(config_hash(a).size() == 16);
    apply_setting(b, "synth.r", "0.31");
    CHECK(config_hash(a) != config_hash(b));
    apply_setting(b, "synth.r", std::to_string(a.synth.violation_ratio));
    CHECK(canonical_text(a) == canonical_text(b));
  }

  TEST_CASE("basis and knots") {
    RunConfig c;
    apply_setting(c, "nuisance.basis", "linear");
    CHECK(c.nuisance.basis.linear);
    CHECK(c.nuisance.basis.knots.empty());
    apply_setting(c, "nuisance.basis", "linear+step");
    CHECK(c.nuisance.basis.knots == std::vector<double>{0.5});
    apply_setting(c, "nuisance.knots", "0,1.5");
    CHECK(c.nuisance.basis.knots == std::vector<double>{0.0, 1.5});
    CHECK_THROWS_AS(apply_setting(c, "nuisance.basis", "spline"), InvalidConfig);
  }

  TEST_CASE("validation and sweep variables") {
    RunConfig c;
    c.validate();
    c.sweep_var = "nothing";
    CHECK_THROWS_AS(c.validate(), InvalidConfig);
    synth::SynthConfig s;
    for (const std::string& v : sweep_variables()) {
      set_sweep_value(s, v, 3.0);
      CHECK(get_sweep_value(s, v) == 3.0);
    }
    CHECK_THROWS_AS(set_sweep_value(s, "rho", 0.1), InvalidConfig);
  }
}
