#include "ooload/splits/splits.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>

#include "ooload/core/error.hpp"
#include "ooload/core/rng.hpp"

namespace ooload {

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw InvalidSpec(fmt::format("{}: '{}' is not a number", key, v));
  }
}

const std::string& entity_of(const MetadataRecord& r, const std::string& field) {
  return field == "group_key" ? r.group_key : r.entity_id;
}

// Fisher-Yates with the library generator, so the permutation does not depend
// on the standard library's shuffle.
template <typename T>
void seeded_shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[rng.uniform_below(i)]);
  }
}

void check_targets(const std::map<std::int32_t, double>& target) {
  if (target.empty()) throw InvalidSpec("class targets are empty");
  double sum = 0.0;
  for (const auto& [c, f] : target) {
    if (!(f >= 0.0) || f > 1.0) throw InvalidSpec(fmt::format("class {} target {} outside [0, 1]", c, f));
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw InvalidSpec(fmt::format("class targets sum to {}, not 1", sum));
}

using MetaIndex = std::unordered_map<SampleId, const MetadataRecord*, SampleIdHash>;

MetaIndex index_metadata(const std::vector<MetadataRecord>& metadata) {
  MetaIndex idx;
  idx.reserve(metadata.size());
  for (const auto& r : metadata) idx.emplace(r.id, &r);
  return idx;
}

}  // namespace

void SplitSpec::validate() const {
  if (ratios.empty()) throw InvalidSpec("ratios are empty");
  double sum = 0.0;
  for (double r : ratios) {
    if (!(r > 0.0)) throw InvalidSpec(fmt::format("ratio {} is not positive", r));
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw InvalidSpec(fmt::format("ratios sum to {}, not 1", sum));
  if (entity_field != "entity_id" && entity_field != "group_key") {
    throw InvalidSpec("unknown entity field '" + entity_field + "'");
  }
  if (class_field != "class_label") throw InvalidSpec("unknown class field '" + class_field + "'");
  if (!(tolerance >= 0.0) || tolerance >= 1.0) throw InvalidSpec("tolerance must be in [0, 1)");
  if (target_class_proportions) check_targets(*target_class_proportions);
}

SplitSpec SplitSpec::parse(const std::string& text) {
  SplitSpec spec;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw InvalidSpec("expected key=value, got '" + line + "'");
    const auto key = trim(line.substr(0, eq));
    const auto val = trim(line.substr(eq + 1));
    if (key == "ratios") {
      spec.ratios.clear();
      for (const auto& r : split_on(val, ',')) spec.ratios.push_back(parse_double(key, r));
    } else if (key == "entity_field") {
      spec.entity_field = val;
    } else if (key == "class_field") {
      spec.class_field = val;
    } else if (key == "targets") {
      std::map<std::int32_t, double> t;
      for (const auto& kv : split_on(val, ',')) {
        const auto colon = kv.find(':');
        if (colon == std::string::npos) throw InvalidSpec("targets entry '" + kv + "' is not class:fraction");
        const auto c = static_cast<std::int32_t>(parse_double(key, kv.substr(0, colon)));
        t[c] = parse_double(key, kv.substr(colon + 1));
      }
      spec.target_class_proportions = std::move(t);
    } else if (key == "tolerance") {
      spec.tolerance = parse_double(key, val);
    } else if (key == "seed") {
      try {
        spec.seed = std::stoull(val);
      } catch (const std::exception&) {
        throw InvalidSpec("seed: '" + val + "' is not an integer");
      }
    } else {
      throw InvalidSpec("unknown spec key '" + key + "'");
    }
  }
  spec.validate();
  return spec;
}

SplitSpec SplitSpec::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot read split spec " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::size_t SplitResult::kept() const noexcept {
  std::size_t n = 0;
  for (const auto& s : splits) n += s.size();
  return n;
}

Rebalanced class_rebalance(const std::vector<SampleId>& split, const std::vector<MetadataRecord>& metadata,
                           const std::map<std::int32_t, double>& target, std::uint64_t seed,
                           double tolerance) {
  check_targets(target);
  const auto idx = index_metadata(metadata);
  std::map<std::int32_t, std::vector<std::size_t>> by_class;  // positions in `split`
  for (std::size_t i = 0; i < split.size(); ++i) {
    const auto it = idx.find(split[i]);
    if (it == idx.end()) throw InvalidInput("no metadata for " + split[i].str());
    by_class[it->second->class_label].push_back(i);
  }
  for (const auto& [c, f] : target) {
    if (f > 0.0 && by_class[c].empty()) throw InvalidSpec(fmt::format("class {} has no samples", c));
  }

  struct Cls {
    std::int32_t label;
    std::size_t n;
    double t;
  };
  std::vector<Cls> cls;
  for (const auto& [c, pos] : by_class) {
    if (pos.empty()) continue;
    const auto it = target.find(c);
    cls.push_back({c, pos.size(), it == target.end() ? 0.0 : it->second});
  }

  // Largest kept total K for which per-class bounds admit a solution.
  std::vector<std::size_t> keep(cls.size());
  const std::size_t total = split.size();
  const double eps = 1e-12;
  std::size_t K = total;
  for (; K > 0; --K) {
    std::size_t lo_sum = 0, hi_sum = 0;
    bool ok = true;
    for (const auto& c : cls) {
      const double kd = static_cast<double>(K);
      const auto lo = static_cast<std::size_t>(std::max(0.0, std::ceil((c.t - tolerance) * kd - eps)));
      const auto hi = std::min(c.n, static_cast<std::size_t>(std::floor((c.t + tolerance) * kd + eps)));
      if (lo > hi) {
        ok = false;
        break;
      }
      lo_sum += lo;
      hi_sum += hi;
    }
    if (ok && lo_sum <= K && K <= hi_sum) break;
  }
  if (K == 0) throw InvalidSpec("class targets are unreachable for this split");

  // Start at the upper bounds and take away from the most over-represented
  // classes first.
  const double kd = static_cast<double>(K);
  std::vector<std::size_t> lo(cls.size());
  std::size_t sum = 0;
  for (std::size_t i = 0; i < cls.size(); ++i) {
    keep[i] = std::min(cls[i].n, static_cast<std::size_t>(std::floor((cls[i].t + tolerance) * kd + eps)));
    lo[i] = static_cast<std::size_t>(std::max(0.0, std::ceil((cls[i].t - tolerance) * kd - eps)));
    sum += keep[i];
  }
  while (sum > K) {
    std::size_t worst = cls.size();
    double worst_excess = -1e300;
    for (std::size_t i = 0; i < cls.size(); ++i) {
      if (keep[i] <= lo[i]) continue;
      const double excess = static_cast<double>(keep[i]) / kd - cls[i].t;
      if (excess > worst_excess) {
        worst_excess = excess;
        worst = i;
      }
    }
    --keep[worst];
    --sum;
  }

  std::vector<char> drop(split.size(), 0);
  for (std::size_t i = 0; i < cls.size(); ++i) {
    auto pos = by_class[cls[i].label];
    Rng rng(seed, static_cast<std::uint64_t>(static_cast<std::uint32_t>(cls[i].label)));
    seeded_shuffle(pos, rng);
    for (std::size_t j = 0; j < cls[i].n - keep[i]; ++j) drop[pos[j]] = 1;
  }
  Rebalanced out;
  for (std::size_t i = 0; i < split.size(); ++i) (drop[i] ? out.dropped : out.kept).push_back(split[i]);
  return out;
}

SplitResult create_splits(const std::vector<MetadataRecord>& metadata, const SplitSpec& spec) {
  spec.validate();
  if (metadata.empty()) throw InvalidInput("create_splits needs metadata");

  struct Group {
    std::string entity;
    std::vector<std::size_t> members;
  };
  std::vector<Group> groups;
  {
    std::unordered_map<std::string, std::size_t> where;
    std::unordered_set<SampleId, SampleIdHash> seen;
    for (std::size_t i = 0; i < metadata.size(); ++i) {
      const auto& r = metadata[i];
      if (!seen.insert(r.id).second) throw InvalidInput("duplicate id " + r.id.str());
      const auto& ent = entity_of(r, spec.entity_field);
      if (ent.empty()) throw InvalidInput("record " + r.id.str() + " has an empty " + spec.entity_field);
      auto [it, fresh] = where.try_emplace(ent, groups.size());
      if (fresh) groups.push_back({ent, {}});
      groups[it->second].members.push_back(i);
    }
  }
  std::sort(groups.begin(), groups.end(), [](const Group& a, const Group& b) {
    if (a.members.size() != b.members.size()) return a.members.size() > b.members.size();
    return a.entity < b.entity;
  });

  const std::size_t ns = spec.ratios.size();
  const double total = static_cast<double>(metadata.size());
  SplitResult res;
  res.splits.resize(ns);
  res.class_histograms.resize(ns);
  res.entity_sets.resize(ns);

  // Exact deficit ties go to the split that comes first in a seeded order.
  std::vector<std::size_t> tie_rank(ns);
  {
    std::vector<std::size_t> order(ns);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(spec.seed, 0x5711);
    seeded_shuffle(order, rng);
    for (std::size_t r = 0; r < ns; ++r) tie_rank[order[r]] = r;
  }

  const double smallest_capacity = *std::min_element(spec.ratios.begin(), spec.ratios.end()) * total;
  std::vector<std::map<std::int32_t, double>> class_deficit(ns);
  if (spec.target_class_proportions) {
    for (std::size_t s = 0; s < ns; ++s) {
      for (const auto& [c, f] : *spec.target_class_proportions) class_deficit[s][c] = f * spec.ratios[s] * total;
    }
  }

  std::vector<double> assigned(ns, 0.0);
  for (const auto& g : groups) {
    std::map<std::int32_t, double> gclass;
    for (auto i : g.members) gclass[metadata[i].class_label] += 1.0;
    const auto class_gain = [&](std::size_t s) {
      double gain = 0.0;
      for (const auto& [c, n] : gclass) {
        const auto it = class_deficit[s].find(c);
        if (it != class_deficit[s].end()) gain += std::min(n, std::max(0.0, it->second));
      }
      return gain;
    };
    std::size_t best = 0;
    for (std::size_t s = 1; s < ns; ++s) {
      const double ds = spec.ratios[s] * total - assigned[s];
      const double db = spec.ratios[best] * total - assigned[best];
      if (ds > db) {
        best = s;
      } else if (ds == db) {
        const double gs = class_gain(s), gb = class_gain(best);
        if (gs > gb || (gs == gb && tie_rank[s] < tie_rank[best])) best = s;
      }
    }
    if (static_cast<double>(g.members.size()) > smallest_capacity) {
      res.warnings.push_back(fmt::format("SplitInfeasible: entity '{}' has {} records, smallest split holds {:.1f}",
                                         g.entity, g.members.size(), smallest_capacity));
    }
    assigned[best] += static_cast<double>(g.members.size());
    for (const auto& [c, n] : gclass) {
      auto it = class_deficit[best].find(c);
      if (it != class_deficit[best].end()) it->second -= n;
    }
    res.entity_sets[best].insert(g.entity);
    for (auto i : g.members) res.splits[best].push_back(metadata[i].id);
  }

  // Within a split, keep input order.
  std::unordered_map<SampleId, std::size_t, SampleIdHash> pos;
  for (std::size_t i = 0; i < metadata.size(); ++i) pos.emplace(metadata[i].id, i);
  for (auto& s : res.splits) {
    std::sort(s.begin(), s.end(), [&](const SampleId& a, const SampleId& b) { return pos[a] < pos[b]; });
  }

  if (spec.target_class_proportions) {
    for (std::size_t s = 0; s < ns; ++s) {
      if (res.splits[s].empty()) continue;
      auto rb = class_rebalance(res.splits[s], metadata, *spec.target_class_proportions, spec.seed + s,
                                spec.tolerance);
      res.splits[s] = std::move(rb.kept);
      res.dropped.insert(res.dropped.end(), rb.dropped.begin(), rb.dropped.end());
    }
    std::sort(res.dropped.begin(), res.dropped.end(),
              [&](const SampleId& a, const SampleId& b) { return pos[a] < pos[b]; });
    // An entity whose records were all dropped no longer belongs to the split.
    for (std::size_t s = 0; s < ns; ++s) {
      res.entity_sets[s].clear();
      for (const auto& id : res.splits[s]) res.entity_sets[s].insert(entity_of(metadata[pos[id]], spec.entity_field));
    }
  }

  for (std::size_t s = 0; s < ns; ++s) {
    for (const auto& id : res.splits[s]) ++res.class_histograms[s][metadata[pos[id]].class_label];
  }

  const auto audit = audit_split(res, metadata, spec);
  for (std::size_t s = 0; s < ns; ++s) {
    const auto& a = audit.splits[s];
    if (a.size_deviation > spec.tolerance) {
      res.warnings.push_back(fmt::format("OutOfTolerance: split {} holds {:.4f} of the records, ratio {:.4f}", s,
                                         a.fraction, spec.ratios[s]));
    }
    if (a.records > 0 && a.class_deviation > spec.tolerance) {
      res.warnings.push_back(
          fmt::format("OutOfTolerance: split {} class mix deviates by {:.4f}", s, a.class_deviation));
    }
  }
  return res;
}

SplitAudit audit_split(const SplitResult& result, const std::vector<MetadataRecord>& metadata,
                       const SplitSpec& spec) {
  SplitAudit audit;
  const auto idx = index_metadata(metadata);
  const std::size_t ns = result.splits.size();
  audit.splits.resize(ns);
  audit.dropped = result.dropped.size();

  if (ns != spec.ratios.size()) {
    audit.violations.push_back(fmt::format("result has {} splits, spec has {} ratios", ns, spec.ratios.size()));
  }

  std::unordered_map<SampleId, int, SampleIdHash> seen;
  const auto count_id = [&](const SampleId& id, const std::string& where) {
    if (!idx.count(id)) audit.violations.push_back("id " + id.str() + " in " + where + " has no metadata");
    if (++seen[id] == 2) audit.violations.push_back("id " + id.str() + " appears more than once");
  };
  for (std::size_t s = 0; s < ns; ++s) {
    for (const auto& id : result.splits[s]) count_id(id, fmt::format("split {}", s));
  }
  for (const auto& id : result.dropped) count_id(id, "dropped");
  for (const auto& r : metadata) {
    if (!seen.count(r.id)) audit.violations.push_back("id " + r.id.str() + " is in no split");
  }

  std::map<std::int32_t, std::size_t> all_classes;
  for (const auto& r : metadata) ++all_classes[r.class_label];
  if (spec.target_class_proportions) {
    audit.reference_proportions = *spec.target_class_proportions;
  } else {
    for (const auto& [c, n] : all_classes) {
      audit.reference_proportions[c] = static_cast<double>(n) / static_cast<double>(metadata.size());
    }
  }

  std::map<std::string, std::set<std::size_t>> entity_home;
  std::size_t kept = 0;
  for (const auto& s : result.splits) kept += s.size();
  for (std::size_t s = 0; s < ns; ++s) {
    auto& e = audit.splits[s];
    std::set<std::string> ents;
    for (const auto& id : result.splits[s]) {
      const auto it = idx.find(id);
      if (it == idx.end()) continue;
      ++e.class_histogram[it->second->class_label];
      ents.insert(entity_of(*it->second, spec.entity_field));
    }
    for (const auto& ent : ents) entity_home[ent].insert(s);
    e.records = result.splits[s].size();
    e.entities = ents.size();
    e.fraction = kept ? static_cast<double>(e.records) / static_cast<double>(kept) : 0.0;
    if (s < spec.ratios.size()) e.size_deviation = std::abs(e.fraction - spec.ratios[s]) / spec.ratios[s];
    if (e.records > 0) {
      std::set<std::int32_t> labels;
      for (const auto& [c, f] : audit.reference_proportions) labels.insert(c);
      for (const auto& [c, n] : e.class_histogram) labels.insert(c);
      for (auto c : labels) {
        const auto hit = e.class_histogram.find(c);
        const double got =
            hit == e.class_histogram.end() ? 0.0 : static_cast<double>(hit->second) / static_cast<double>(e.records);
        const auto rit = audit.reference_proportions.find(c);
        const double want = rit == audit.reference_proportions.end() ? 0.0 : rit->second;
        e.class_deviation = std::max(e.class_deviation, std::abs(got - want));
      }
    }
    if (s < result.class_histograms.size() && result.class_histograms[s] != e.class_histogram) {
      audit.violations.push_back(fmt::format("split {} class histogram does not match its ids", s));
    }
    if (s < result.entity_sets.size() && result.entity_sets[s] != ents) {
      audit.violations.push_back(fmt::format("split {} entity set does not match its ids", s));
    }
  }
  for (const auto& [ent, homes] : entity_home) {
    if (homes.size() > 1) {
      std::string list;
      for (auto h : homes) list += (list.empty() ? "" : ",") + std::to_string(h);
      audit.violations.push_back("entity '" + ent + "' appears in splits " + list);
    }
  }
  return audit;
}

std::string SplitAudit::to_text() const {
  std::string out;
  out += fmt::format("splits={}\n", splits.size());
  out += fmt::format("violations={}\n", violations.size());
  out += fmt::format("dropped={}\n", dropped);
  for (std::size_t s = 0; s < splits.size(); ++s) {
    const auto& e = splits[s];
    out += fmt::format("split.{}.records={}\n", s, e.records);
    out += fmt::format("split.{}.entities={}\n", s, e.entities);
    out += fmt::format("split.{}.fraction={:.6f}\n", s, e.fraction);
    out += fmt::format("split.{}.size_deviation={:.6f}\n", s, e.size_deviation);
    out += fmt::format("split.{}.class_deviation={:.6f}\n", s, e.class_deviation);
    std::string hist;
    for (const auto& [c, n] : e.class_histogram) hist += fmt::format("{}{}:{}", hist.empty() ? "" : ",", c, n);
    out += fmt::format("split.{}.classes={}\n", s, hist);
  }
  for (std::size_t i = 0; i < violations.size(); ++i) out += fmt::format("violation.{}={}\n", i, violations[i]);
  return out;
}

void write_uuid_list(const std::string& path, const std::vector<SampleId>& ids) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InvalidInput("cannot write " + path);
  for (const auto& id : ids) out << id.str() << '\n';
  if (!out) throw InvalidInput("write failed: " + path);
}

std::vector<SampleId> read_uuid_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot read " + path);
  std::vector<SampleId> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    try {
      ids.push_back(SampleId::parse(line));
    } catch (const InvalidInput& e) {
      throw InvalidInput(fmt::format("{}:{}: {}", path, lineno, e.what()));
    }
  }
  return ids;
}

std::vector<std::string> write_split_files(const SplitResult& result, const SplitAudit& audit,
                                           const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::vector<std::string> paths;
  for (std::size_t s = 0; s < result.splits.size(); ++s) {
    const auto p = (fs::path(dir) / fmt::format("split_{}.txt", s)).string();
    write_uuid_list(p, result.splits[s]);
    paths.push_back(p);
  }
  write_uuid_list((fs::path(dir) / "dropped.txt").string(), result.dropped);
  std::ofstream rep(fs::path(dir) / "report.txt", std::ios::trunc);
  rep << audit.to_text();
  for (std::size_t i = 0; i < result.warnings.size(); ++i) rep << "warning." << i << '=' << result.warnings[i] << '\n';
  return paths;
}

}  // namespace ooload
