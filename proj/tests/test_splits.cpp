#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "ooload/bench/synthetic.hpp"
#include "ooload/core/error.hpp"
#include "ooload/splits/splits.hpp"

namespace ooload {
namespace {

namespace fs = std::filesystem;

MetadataRecord rec(SampleIdGenerator& gen, std::string entity, std::int32_t cls, std::string group = "g") {
  MetadataRecord m;
  m.id = gen.next();
  m.entity_id = std::move(entity);
  m.group_key = std::move(group);
  m.class_label = cls;
  return m;
}

std::vector<MetadataRecord> synthetic_metadata(std::size_t n, std::size_t entities, std::uint64_t seed) {
  SyntheticDatasetSpec s;
  s.num_samples = n;
  s.num_entities = entities;
  s.num_classes = 10;
  s.class_skew = 1.0;
  s.mean_size = 100;
  s.seed = seed;
  SyntheticDataset ds(s);
  std::vector<MetadataRecord> out;
  for (std::size_t i = 0; i < ds.size(); ++i) out.push_back(ds.metadata(i));
  return out;
}

SplitSpec spec_of(std::vector<double> ratios, std::uint64_t seed = 1) {
  SplitSpec s;
  s.ratios = std::move(ratios);
  s.seed = seed;
  return s;
}

// Naive recount of the quantities the audit reports, straight from metadata.
struct Recount {
  std::vector<std::size_t> sizes;
  std::vector<std::map<std::int32_t, std::size_t>> hist;
  std::vector<std::set<std::string>> entities;
};

Recount recount(const SplitResult& r, const std::vector<MetadataRecord>& md) {
  std::map<SampleId, const MetadataRecord*> by_id;
  for (const auto& m : md) by_id[m.id] = &m;
  Recount c;
  for (const auto& split : r.splits) {
    c.sizes.push_back(split.size());
    c.hist.emplace_back();
    c.entities.emplace_back();
    for (const auto& id : split) {
      const auto* m = by_id.at(id);
      ++c.hist.back()[m->class_label];
      c.entities.back().insert(m->entity_id);
    }
  }
  return c;
}

std::pair<double, double> deviations(const std::vector<std::vector<SampleId>>& splits,
                                     const std::vector<MetadataRecord>& md, const std::vector<double>& ratios) {
  std::map<SampleId, std::int32_t> cls;
  std::map<std::int32_t, double> global;
  for (const auto& m : md) {
    cls[m.id] = m.class_label;
    global[m.class_label] += 1.0 / static_cast<double>(md.size());
  }
  double size_dev = 0, class_dev = 0;
  for (std::size_t s = 0; s < splits.size(); ++s) {
    const double frac = static_cast<double>(splits[s].size()) / static_cast<double>(md.size());
    size_dev = std::max(size_dev, std::abs(frac - ratios[s]) / ratios[s]);
    std::map<std::int32_t, double> h;
    for (const auto& id : splits[s]) h[cls[id]] += 1.0;
    for (const auto& [c, g] : global) {
      const double f = splits[s].empty() ? 0.0 : h[c] / static_cast<double>(splits[s].size());
      class_dev = std::max(class_dev, std::abs(f - g));
    }
  }
  return {size_dev, class_dev};
}

TEST(SplitSpec, ValidationAndParsing) {
  EXPECT_THROW(spec_of({0.5, 0.4}).validate(), InvalidSpec);
  EXPECT_THROW(spec_of({1.0, 0.0}).validate(), InvalidSpec);
  EXPECT_THROW(spec_of({}).validate(), InvalidSpec);
  auto s = spec_of({0.5, 0.5});
  s.entity_field = "patient";
  EXPECT_THROW(s.validate(), InvalidSpec);
  s = spec_of({0.5, 0.5});
  s.class_field = "colour";
  EXPECT_THROW(s.validate(), InvalidSpec);
  const auto p = SplitSpec::parse("# splits\nratios=0.8,0.1,0.1\nentity_field=group_key\n"
                                  "targets=0:0.5,1:0.5\ntolerance=0.05\nseed=9\n");
  EXPECT_EQ(p.ratios, (std::vector<double>{0.8, 0.1, 0.1}));
  EXPECT_EQ(p.entity_field, "group_key");
  ASSERT_TRUE(p.target_class_proportions.has_value());
  EXPECT_DOUBLE_EQ(p.target_class_proportions->at(1), 0.5);
  EXPECT_DOUBLE_EQ(p.tolerance, 0.05);
  EXPECT_EQ(p.seed, 9u);
  EXPECT_THROW(SplitSpec::parse("ratios=0.5,0.5\nfoo=1\n"), InvalidSpec);
  EXPECT_THROW(SplitSpec::parse("ratios=0.6,0.3\n"), InvalidSpec);
}

TEST(Splits, FourEqualEntitiesSplitTwoOneOne) {
  SampleIdGenerator gen(1);
  std::vector<MetadataRecord> md;
  for (const char* e : {"a", "b", "c", "d"}) {
    for (int i = 0; i < 5; ++i) md.push_back(rec(gen, e, i % 2));
  }
  const auto r = create_splits(md, spec_of({0.5, 0.25, 0.25}));
  ASSERT_EQ(r.entity_sets.size(), 3u);
  EXPECT_EQ(r.entity_sets[0].size(), 2u);
  EXPECT_EQ(r.entity_sets[1].size(), 1u);
  EXPECT_EQ(r.entity_sets[2].size(), 1u);
  EXPECT_EQ(r.splits[0].size(), 10u);
  EXPECT_TRUE(r.dropped.empty());
}

TEST(Splits, SingleEntityIsInfeasibleButAssigned) {
  SampleIdGenerator gen(2);
  std::vector<MetadataRecord> md;
  for (int i = 0; i < 10; ++i) md.push_back(rec(gen, "only", 0));
  const auto r = create_splits(md, spec_of({0.8, 0.2}));
  EXPECT_EQ(r.splits[0].size(), 10u);
  EXPECT_TRUE(r.splits[1].empty());
  EXPECT_FALSE(r.ok());
  EXPECT_TRUE(std::any_of(r.warnings.begin(), r.warnings.end(),
                          [](const std::string& w) { return w.rfind("SplitInfeasible", 0) == 0; }));
}

TEST(Splits, GroupKeyCanDefineIndependence) {
  SampleIdGenerator gen(3);
  std::vector<MetadataRecord> md;
  for (int i = 0; i < 40; ++i) md.push_back(rec(gen, "e" + std::to_string(i), 0, "site" + std::to_string(i % 4)));
  auto s = spec_of({0.5, 0.5});
  s.entity_field = "group_key";
  const auto r = create_splits(md, s);
  EXPECT_EQ(r.entity_sets[0].size() + r.entity_sets[1].size(), 4u);
  EXPECT_EQ(r.splits[0].size(), 20u);
}

TEST(Splits, SyntheticDatasetMeetsTolerancesAndBeatsRandomAssignment) {
  const auto md = synthetic_metadata(10000, 500, 1);
  const std::vector<double> ratios{0.8, 0.1, 0.1};
  const auto r = create_splits(md, spec_of(ratios, 5));
  const auto audit = audit_split(r, md, spec_of(ratios, 5));
  EXPECT_TRUE(audit.violations.empty()) << audit.to_text();
  EXPECT_TRUE(r.ok()) << (r.warnings.empty() ? "" : r.warnings.front());
  const auto [size_dev, class_dev] = deviations(r.splits, md, ratios);
  EXPECT_LE(size_dev, 0.02);
  EXPECT_LE(class_dev, 0.02);
  for (std::size_t s = 0; s < 3; ++s) {
    EXPECT_NEAR(static_cast<double>(r.splits[s].size()) / 10000.0, ratios[s], 0.02 * ratios[s]);
  }
  // Baseline: every entity goes to a split drawn with probability = ratio.
  std::map<std::string, std::vector<SampleId>> groups;
  for (const auto& m : md) groups[m.entity_id].push_back(m.id);
  // Without class targets the greedy balances record counts only, so the
  // comparison is on the worse of the two deviations per trial, plus the
  // class deviation against the baseline mean.
  const int trials = 20;
  double baseline_class = 0;
  for (int t = 0; t < trials; ++t) {
    Rng rng(100 + t);
    std::vector<std::vector<SampleId>> splits(3);
    for (const auto& [e, ids] : groups) {
      const double u = rng.uniform01();
      const std::size_t s = u < 0.8 ? 0 : (u < 0.9 ? 1 : 2);
      splits[s].insert(splits[s].end(), ids.begin(), ids.end());
    }
    const auto [bs, bc] = deviations(splits, md, ratios);
    EXPECT_LE(size_dev, bs) << "trial " << t;
    EXPECT_LE(std::max(size_dev, class_dev), std::max(bs, bc)) << "trial " << t;
    baseline_class += bc / trials;
  }
  EXPECT_LE(class_dev, baseline_class);
}

TEST(Splits, DeterministicAndSeedSensitive) {
  const auto md = synthetic_metadata(3000, 150, 4);
  const auto a = create_splits(md, spec_of({0.6, 0.2, 0.2}, 3));
  const auto b = create_splits(md, spec_of({0.6, 0.2, 0.2}, 3));
  EXPECT_EQ(a, b);
  EXPECT_THROW(create_splits({}, spec_of({1.0})), InvalidInput);
  auto dup = md;
  dup.push_back(md.front());
  EXPECT_THROW(create_splits(dup, spec_of({0.5, 0.5})), InvalidInput);
}

TEST(Splits, EntityDisjointnessOverRandomStructures) {
  Rng r(77);
  for (int trial = 0; trial < 150; ++trial) {
    SampleIdGenerator gen(trial);
    const std::size_t entities = 1 + r.uniform_below(60);
    std::vector<MetadataRecord> md;
    for (std::size_t e = 0; e < entities; ++e) {
      // Heavy-tailed group sizes.
      const std::size_t size = 1 + static_cast<std::size_t>(r.lognormal(1.0, 1.2));
      for (std::size_t k = 0; k < size; ++k) {
        md.push_back(rec(gen, "ent" + std::to_string(e), static_cast<std::int32_t>(r.uniform_below(4))));
      }
    }
    std::shuffle(md.begin(), md.end(), r);
    const std::size_t k = 1 + r.uniform_below(4);
    std::vector<double> ratios(k);
    double sum = 0;
    for (auto& x : ratios) sum += (x = 1.0 + static_cast<double>(r.uniform_below(10)));
    for (auto& x : ratios) x /= sum;
    double total = 0;
    for (std::size_t i = 0; i + 1 < k; ++i) total += ratios[i];
    ratios.back() = 1.0 - total;
    auto spec = spec_of(ratios, trial);
    if (r.uniform_below(3) == 0) spec.target_class_proportions = std::map<std::int32_t, double>{
        {0, 0.25}, {1, 0.25}, {2, 0.25}, {3, 0.25}};
    SplitResult res;
    try {
      res = create_splits(md, spec);
    } catch (const InvalidSpec&) {
      // A targeted class absent from some split.
      ASSERT_TRUE(spec.target_class_proportions.has_value());
      continue;
    }
    const auto audit = audit_split(res, md, spec);
    ASSERT_TRUE(audit.violations.empty()) << "trial " << trial << "\n" << audit.to_text();
    const auto c = recount(res, md);
    for (std::size_t i = 0; i < k; ++i) {
      EXPECT_EQ(c.entities[i], res.entity_sets[i]);
      EXPECT_EQ(c.hist[i], res.class_histograms[i]);
      EXPECT_EQ(c.hist[i], audit.splits[i].class_histogram);
      for (std::size_t j = i + 1; j < k; ++j) {
        std::vector<std::string> both;
        std::set_intersection(c.entities[i].begin(), c.entities[i].end(), c.entities[j].begin(),
                              c.entities[j].end(), std::back_inserter(both));
        ASSERT_TRUE(both.empty()) << "trial " << trial;
      }
    }
    std::multiset<SampleId> all(res.dropped.begin(), res.dropped.end());
    for (const auto& s : res.splits) all.insert(s.begin(), s.end());
    ASSERT_EQ(all.size(), md.size());
    ASSERT_EQ(std::set<SampleId>(all.begin(), all.end()).size(), md.size());
  }
}

TEST(Rebalance, BalancedSplitKeepsEverything) {
  SampleIdGenerator gen(5);
  std::vector<MetadataRecord> md;
  std::vector<SampleId> ids;
  for (int i = 0; i < 40; ++i) {
    md.push_back(rec(gen, "e", i % 4));
    ids.push_back(md.back().id);
  }
  const auto r = class_rebalance(ids, md, {{0, 0.25}, {1, 0.25}, {2, 0.25}, {3, 0.25}}, 1);
  EXPECT_TRUE(r.dropped.empty());
  EXPECT_EQ(r.kept, ids);
}

TEST(Rebalance, NinetyTenToFiftyFifty) {
  SampleIdGenerator gen(6);
  std::vector<MetadataRecord> md;
  std::vector<SampleId> ids;
  for (int i = 0; i < 100; ++i) {
    md.push_back(rec(gen, "e", i < 90 ? 0 : 1));
    ids.push_back(md.back().id);
  }
  const auto r = class_rebalance(ids, md, {{0, 0.5}, {1, 0.5}}, 3, 0.0);
  std::map<std::int32_t, int> kept;
  std::map<SampleId, std::int32_t> cls;
  for (const auto& m : md) cls[m.id] = m.class_label;
  for (const auto& id : r.kept) ++kept[cls[id]];
  EXPECT_EQ(kept[1], 10);
  EXPECT_EQ(kept[0], 10);
  EXPECT_NEAR(static_cast<double>(r.dropped.size()), 90.0 * 8 / 9, 1.0);
  for (const auto& id : r.dropped) EXPECT_EQ(cls[id], 0);
  // Kept items stay in input order.
  EXPECT_TRUE(std::is_sorted(r.kept.begin(), r.kept.end(), [&](const SampleId& a, const SampleId& b) {
    return std::find(ids.begin(), ids.end(), a) < std::find(ids.begin(), ids.end(), b);
  }));
  // Tolerance lets a few more majority items stay.
  const auto loose = class_rebalance(ids, md, {{0, 0.5}, {1, 0.5}}, 3, 0.02);
  EXPECT_GE(loose.kept.size(), r.kept.size());
  std::map<std::int32_t, int> lk;
  for (const auto& id : loose.kept) ++lk[cls[id]];
  EXPECT_EQ(lk[1], 10);
  EXPECT_LE(std::abs(static_cast<double>(lk[0]) / static_cast<double>(loose.kept.size()) - 0.5), 0.02 + 1e-12);
}

TEST(Rebalance, MissingTargetClassIsInvalidSpec) {
  SampleIdGenerator gen(7);
  std::vector<MetadataRecord> md{rec(gen, "e", 0), rec(gen, "e", 0)};
  const std::vector<SampleId> ids{md[0].id, md[1].id};
  try {
    class_rebalance(ids, md, {{0, 0.5}, {4, 0.5}}, 1);
    FAIL() << "expected InvalidSpec";
  } catch (const InvalidSpec& e) {
    EXPECT_NE(std::string(e.what()).find('4'), std::string::npos);
  }
  EXPECT_THROW(class_rebalance(ids, md, {{0, 0.5}}, 1), InvalidSpec);
}

TEST(Rebalance, TargetsApplyPerSplit) {
  const auto md = synthetic_metadata(4000, 200, 9);
  auto spec = spec_of({0.7, 0.3}, 2);
  std::map<std::int32_t, double> t;
  for (int c = 0; c < 10; ++c) t[c] = 0.1;
  spec.target_class_proportions = t;
  const auto r = create_splits(md, spec);
  EXPECT_FALSE(r.dropped.empty());
  const auto audit = audit_split(r, md, spec);
  EXPECT_TRUE(audit.violations.empty()) << audit.to_text();
  for (const auto& e : audit.splits) EXPECT_LE(e.class_deviation, 0.02 + 1e-12);
  EXPECT_EQ(audit.dropped, r.dropped.size());
}

TEST(Audit, FlagsSharedEntityAndMissingIds) {
  SampleIdGenerator gen(8);
  std::vector<MetadataRecord> md{rec(gen, "x", 0), rec(gen, "x", 1), rec(gen, "y", 0)};
  SplitResult bad;
  bad.splits = {{md[0].id}, {md[1].id}};
  bad.class_histograms = {{{0, 1}}, {{1, 1}}};
  bad.entity_sets = {{"x"}, {"x"}};
  const auto audit = audit_split(bad, md, spec_of({0.5, 0.5}));
  auto has = [&](const std::string& needle) {
    return std::any_of(audit.violations.begin(), audit.violations.end(),
                       [&](const std::string& v) { return v.find(needle) != std::string::npos; });
  };
  EXPECT_TRUE(has("x")) << audit.to_text();
  EXPECT_TRUE(has(md[2].id.str())) << audit.to_text();
  auto dup = bad;
  dup.splits[1].push_back(md[0].id);
  EXPECT_GT(audit_split(dup, md, spec_of({0.5, 0.5})).violations.size(), audit.violations.size());
}

TEST(SplitFiles, WriteAndReadBack) {
  const auto md = synthetic_metadata(500, 25, 2);
  const auto spec = spec_of({0.8, 0.2});
  const auto r = create_splits(md, spec);
  const auto audit = audit_split(r, md, spec);
  const auto dir = fs::temp_directory_path() / "ooload_split_files";
  fs::remove_all(dir);
  const auto paths = write_split_files(r, audit, dir.string());
  ASSERT_EQ(paths.size(), 2u);
  for (std::size_t i = 0; i < paths.size(); ++i) EXPECT_EQ(read_uuid_list(paths[i]), r.splits[i]);
  EXPECT_TRUE(fs::exists(dir / "dropped.txt"));
  EXPECT_TRUE(fs::exists(dir / "report.txt"));
  {
    std::ofstream(dir / "bad.txt") << md[0].id.str() << "\nnot-an-id\n";
  }
  try {
    read_uuid_list((dir / "bad.txt").string());
    FAIL() << "expected InvalidInput";
  } catch (const InvalidInput& e) {
    EXPECT_NE(std::string(e.what()).find('2'), std::string::npos);
  }
  fs::remove_all(dir);
}

}  // namespace
}  // namespace ooload
