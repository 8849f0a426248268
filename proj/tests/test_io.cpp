#include <doctest.h>

#include <sstream>

#include "harness/error.hpp"
#include "harness/io.hpp"

using namespace harness;

TEST_CASE("kernel json round trip") {
  const Kernel k = Kernel::from_weights(2, {{make_site({1, 0}), 0.5}, {make_site({0, -2}), 0.5}}, NoiseLaw::rademacher, 0.3);
  const Json j = kernel_to_json(k);
  CHECK(j.at("d") == 2);
  CHECK(j.at("noise") == "rademacher");
  const Kernel back = kernel_from_json(j);
  CHECK(back.range == 2);
  CHECK(back.sigma == 0.3);
  CHECK(back.weight(make_site({0, -2})) == 0.5);
  CHECK_THROWS_AS(kernel_from_json(Json{{"d", 1}}), Error);
  CHECK_THROWS_AS(kernel_from_json(Json::parse(R"({"d":1,"weights":[{"offset":[1],"p":0.7}]})")), Error);
}

TEST_CASE("region json round trip") {
  Region r = Region::cube(2, -2, 2).with_pinned({Site{}});
  r.set_gamma({{make_site({-3, 0}), 1.5}});
  const Region back = region_from_json(region_to_json(r));
  CHECK(back.fingerprint() == r.fingerprint());
  CHECK(back.is_pinned(*back.index_of(Site{})));
  CHECK(*back.gamma(make_site({-3, 0})) == 1.5);
  CHECK_FALSE(back.gamma(make_site({3, 0})).has_value());

  const Region parsed = region_from_json(Json::parse(
      R"({"box":{"lo":[0],"hi":[4]},"pinned":[[0]],"boundary":"free","excluded":[[2]]})"));
  CHECK(parsed.size() == 4);
  CHECK(parsed.boundary() == BoundaryMode::free);
  CHECK_THROWS_AS(region_from_json(Json::parse(
                      R"({"box":{"lo":[0],"hi":[4]},"boundary":"free","gamma":[{"site":[5],"value":1}]})")),
                  Error);
}

TEST_CASE("events jsonl round trip") {
  const Kernel k = Kernel::nearest_neighbor(2);
  const Region r = Region::cube(2, -1, 1);
  const EventStream ev = generate_events(k, r, {0.0, 2.0}, 4);
  std::stringstream buf;
  write_events_jsonl(buf, ev, k, r);
  const EventStream back = read_events_jsonl(buf, k, r);
  CHECK(back.seed == 4);
  CHECK(back.window.end == 2.0);
  REQUIRE(back.events.size() == ev.events.size());
  for (std::size_t n = 0; n < ev.events.size(); ++n) {
    CHECK(back.events[n].time == ev.events[n].time);
    CHECK(back.events[n].eps == ev.events[n].eps);
    CHECK(back.events[n].site == ev.events[n].site);
    CHECK(back.events[n].jump == ev.events[n].jump);
  }
  std::stringstream bad(R"({"window":[0,1],"seed":1})" "\n" R"({"site":[9,9],"time":0.5,"eps":0,"jump":[1,0]})" "\n");
  CHECK_THROWS_AS(read_events_jsonl(bad, k, r), Error);
  std::stringstream junk("not json\n");
  CHECK_THROWS_AS(read_events_jsonl(junk, k, r), Error);
}

TEST_CASE("trajectory and martingale csv") {
  const Kernel k = Kernel::nearest_neighbor(1);
  const Region r = Region::cube(1, 0, 2);
  const EventStream ev = generate_events(k, r, {0.0, 1.0}, 1);
  const double times[] = {0.5, 1.0};
  std::ostringstream out;
  write_trajectory_csv(out, evolve(ev, k, r, flat_field(r), Dynamics::standard, times), r);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "time,x0,value");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 6);

  MartingaleTable t;
  t.lags = {0.0, 1.0};
  t.increments = {{0.5}, {-0.25}};
  std::ostringstream m;
  write_martingale_csv(m, t);
  CHECK(m.str() == "replica,m,increment\n0,0,0.5\n1,0,-0.25\n");
}

TEST_CASE("model and weights export") {
  const Region r = Region::cube(1, -1, 1).with_pinned({Site{}});
  const GibbsModel g = build_model(Kernel::nearest_neighbor(1), r);
  const Json j = model_to_json(g);
  CHECK(j.at("n") == 2);
  CHECK(j.at("sigma").size() == 4);
  CHECK(j.at("freeSites").size() == 2);

  const Kernel k = Kernel::nearest_neighbor(1);
  const EventStream ev = generate_events(k, r, {0.0, 1.0}, 3);
  const Lattice lat(k, r);
  const Json w = dual_weights_to_json(backward_weights(ev, lat, *r.index_of(make_site({1})), 1.0, 0.0), ev, lat);
  CHECK(w.contains("epochs"));
}
