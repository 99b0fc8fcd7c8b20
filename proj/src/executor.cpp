#include "mra/executor.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "mra/errors.hpp"
#include "mra/lanes.hpp"
#include "mra/wire.hpp"

namespace mra {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string label(const PartitionTree& tree, std::size_t region) {
  return "region (" + tree.region_id(region).to_string() + ")";
}

void put_atilde(wire::Writer& w, const AtildeSet& a) {
  w.put<std::int32_t>(a.levels);
  w.put<std::uint64_t>(a.blocks.size());
  for (const Matrix& b : a.blocks) w.put(b);
  w.put<std::uint64_t>(a.omega.size());
  for (const Vector& v : a.omega) w.put(v);
}

AtildeSet get_atilde(wire::Reader& r) {
  AtildeSet a;
  a.levels = r.get<std::int32_t>();
  a.blocks.resize(r.get<std::uint64_t>());
  for (Matrix& b : a.blocks) b = r.matrix();
  a.omega.resize(r.get<std::uint64_t>());
  for (Vector& v : a.omega) v = r.vector();
  return a;
}

void put_row(wire::Writer& w, const ChainRow& row) {
  w.put(row.mean);
  w.put<std::uint64_t>(row.cov.size());
  for (const Matrix& m : row.cov) w.put(m);
}

ChainRow get_row(wire::Reader& r) {
  ChainRow row;
  row.mean = r.vector();
  row.cov.resize(r.get<std::uint64_t>());
  for (Matrix& m : row.cov) m = r.matrix();
  return row;
}

void put_points(wire::Writer& w, const PointList& points) {
  std::vector<double> flat;
  for (const Point& p : points) {
    flat.push_back(p.x);
    flat.push_back(p.y);
  }
  w.put(flat);
}

PointList get_points(wire::Reader& r) {
  const auto flat = r.list<double>();
  PointList out;
  for (std::size_t i = 0; i + 1 < flat.size(); i += 2) out.push_back({flat[i], flat[i + 1]});
  return out;
}

/// What every worker reports back to worker 0 at the end of a run.
struct WorkerReport {
  WorkerStats stats;
  PredictionResults predictions;
  std::vector<std::size_t> indices;
};

std::string encode(const WorkerReport& rep) {
  wire::Writer w;
  w.put<std::uint64_t>(rep.stats.range.begin);
  w.put<std::uint64_t>(rep.stats.range.end);
  w.put<std::uint64_t>(rep.stats.peak_bytes);
  w.put(rep.stats.processed);
  w.put(rep.stats.merged);
  w.put(rep.stats.times.prior);
  w.put(rep.stats.times.posterior);
  w.put(rep.stats.times.predict);
  put_points(w, rep.predictions.locations);
  w.put(rep.predictions.mean);
  w.put(rep.predictions.variance);
  w.put(rep.indices);
  return w.take();
}

WorkerReport decode(const std::string& bytes) {
  wire::Reader r(bytes);
  WorkerReport rep;
  rep.stats.range.begin = r.get<std::uint64_t>();
  rep.stats.range.end = r.get<std::uint64_t>();
  rep.stats.peak_bytes = r.get<std::uint64_t>();
  rep.stats.processed = r.list<std::size_t>();
  rep.stats.merged = r.list<std::size_t>();
  rep.stats.times.prior = r.get<double>();
  rep.stats.times.posterior = r.get<double>();
  rep.stats.times.predict = r.get<double>();
  rep.predictions.locations = get_points(r);
  rep.predictions.mean = r.list<double>();
  rep.predictions.variance = r.list<double>();
  rep.indices = r.list<std::size_t>();
  return rep;
}

/// State machine of one worker.
class Worker {
 public:
  Worker(const PartitionTree& tree, const CovarianceParams& params, std::span<const double> y,
         const PointList* locations, const ExecutorOptions& options, const WorkerAssignment& plan,
         Transport& transport)
      : tree_(tree), params_(params), y_(y), locations_(locations), options_(options), plan_(plan),
        t_(transport), me_(transport.rank()), lanes_(options.lanes, options.dynamic),
        store_(tree.region_count(), options.spill_directory, tracker_),
        prior_(tree.region_count()), log_det_(tree.region_count(), 0.0),
        quad_(tree.region_count(), 0.0) {
    in_set_.assign(tree.region_count(), false);
    for (std::size_t id : plan.working[static_cast<std::size_t>(me_)]) in_set_[id] = true;
    stats_.range = plan.ranges[static_cast<std::size_t>(me_)];
    done_.assign(tree.region_count(), 0);
    span_.resize(tree.region_count());
    for (std::size_t id = tree.region_count(); id-- > 0;) {
      if (tree.is_finest(id)) {
        const std::size_t f = id - tree.level_begin(tree.levels());
        span_[id] = {f, f + 1};
      } else {
        const auto kids = tree.children(id);
        span_[id] = {span_[kids.front()].begin, span_[kids.back()].end};
      }
    }
  }

  void run(ExecutionResult* out) {
    t_.barrier(1);
    auto start = Clock::now();
    prior_pass();
    stats_.times.prior = seconds_since(start);

    t_.barrier(2);
    start = Clock::now();
    ascending_pass();
    const auto [log_det, quad] = reduce();
    stats_.times.posterior = seconds_since(start);

    WorkerReport report;
    if (locations_) {
      start = Clock::now();
      predict(report);
      stats_.times.predict = seconds_since(start);
      if (options_.prediction_stem)
        write_predictions(prediction_file_name(*options_.prediction_stem, me_), report.predictions);
    }
    stats_.peak_bytes = tracker_.peak();
    report.stats = stats_;

    const std::uint64_t tag = make_tag(Phase::result);
    if (me_ != 0) {
      t_.send(0, tag, encode(report));
      return;
    }
    out->log_det = log_det;
    out->quad = quad;
    out->observations = tree_.retained_count();
    out->loglik = gaussian_loglik(out->observations, log_det, quad);
    out->times = stats_.times;
    std::vector<WorkerReport> reports;
    reports.push_back(std::move(report));
    for (int w = 1; w < t_.size(); ++w) reports.push_back(decode(t_.recv(w, tag)));
    assemble(reports, out);
  }

 private:
  bool holds(std::size_t region) const { return plan_.merges[region].holder == me_; }

  void prior_pass() {
    for (int level = 1; level <= tree_.levels(); ++level) {
      std::vector<std::size_t> ids;
      const std::size_t begin = tree_.level_begin(level);
      for (std::size_t id = begin; id < begin + tree_.level_size(level); ++id)
        if (in_set_[id]) ids.push_back(id);
      lanes_.parallel_for(ids.size(), [&](std::size_t i) {
        prior_[ids[i]] = compute_region_prior(tree_, ids[i], params_, prior_);
      });
    }
  }

  void ascending_pass() {
    const int levels = tree_.levels();
    const bool keep = locations_ != nullptr;
    if (keep) kept_.resize(tree_.region_count());

    // Subtrees whose finest regions are all owned here run depth first, so a
    // parent merges as soon as its children are done.
    std::vector<std::size_t> units = local_units();
    std::vector<std::vector<std::size_t>> orders(units.size());
    lanes_.parallel_for(units.size(), [&](std::size_t i) { depth_first(units[i], keep, orders[i]); });
    for (const auto& order : orders) stats_.processed.insert(stats_.processed.end(), order.begin(), order.end());

    for (int level = levels - 1; level >= 1; --level) {
      // Regions with at least one child held here.
      std::vector<std::size_t> touched;
      const std::size_t begin = tree_.level_begin(level);
      for (std::size_t id = begin; id < begin + tree_.level_size(level); ++id) {
        if (!in_set_[id] || done_[id]) continue;
        const auto kids = tree_.children(id);
        if (std::any_of(kids.begin(), kids.end(), [&](std::size_t c) { return holds(c); }))
          touched.push_back(id);
      }

      std::vector<AtildeSet> partial(touched.size());
      lanes_.parallel_for(touched.size(), [&](std::size_t i) {
        std::vector<AtildeSet> sets;
        for (std::size_t c : tree_.children(touched[i]))
          if (holds(c)) sets.push_back(store_.fetch(c));
        partial[i] = sum_sets(std::move(sets), tracker_);
      });

      std::vector<std::size_t> finish;
      std::vector<AtildeSet> finish_sets;
      for (std::size_t i = 0; i < touched.size(); ++i) {
        const std::size_t id = touched[i];
        const MergeInfo& info = plan_.merges[id];
        if (info.holder != me_) {
          wire::Writer w;
          put_atilde(w, partial[i]);
          t_.send(info.holder, make_tag(Phase::merge, id), w.take());
          tracker_.release(partial[i].bytes());
          partial[i] = AtildeSet{};
          continue;
        }
        finish.push_back(id);
        finish_sets.push_back(std::move(partial[i]));
      }

      for (std::size_t i = 0; i < finish.size(); ++i) {
        const MergeInfo& info = plan_.merges[finish[i]];
        for (int from : info.contributors) {
          const std::string bytes = t_.recv(from, make_tag(Phase::merge, finish[i]));
          wire::Reader r(bytes);
          AtildeSet incoming = get_atilde(r);
          const std::size_t size = incoming.bytes();
          tracker_.add(size);
          const bool adopt = finish_sets[i].empty();
          accumulate(finish_sets[i], std::move(incoming));
          if (!adopt) tracker_.release(size);
        }
        if (!info.local) stats_.merged.push_back(finish[i]);
      }

      lanes_.parallel_for(finish.size(), [&](std::size_t i) {
        const std::size_t id = finish[i];
        const std::size_t before = finish_sets[i].bytes();
        MergeOutcome outcome = merge_region(prior_[id], std::move(finish_sets[i]), keep, label(tree_, id));
        tracker_.release(before - outcome.atilde.bytes());
        log_det_[id] = outcome.log_det;
        quad_[id] = outcome.quad;
        if (keep) kept_[id] = std::move(outcome.kept);
        if (level > 1) store_.park(id, std::move(outcome.atilde));
      });
      stats_.processed.insert(stats_.processed.end(), finish.begin(), finish.end());
    }
  }

  /// Whether every finest region below `id` is owned by this worker.
  bool self_contained(std::size_t id) const {
    const Range& mine = stats_.range;
    return !mine.empty() && span_[id].begin >= mine.begin && span_[id].end <= mine.end;
  }

  /// Maximal self-contained regions, split further until every lane has work.
  std::vector<std::size_t> local_units() const {
    std::vector<std::size_t> units;
    for (std::size_t id : plan_.working[static_cast<std::size_t>(me_)])
      if (self_contained(id) && (id == 0 || !self_contained(tree_.parent(id)))) units.push_back(id);
    const std::size_t wanted = 4 * static_cast<std::size_t>(options_.lanes);
    while (options_.lanes > 1 && units.size() < wanted) {
      const auto coarsest = std::min_element(units.begin(), units.end(), [&](std::size_t a, std::size_t b) {
        return tree_.level_of(a) < tree_.level_of(b);
      });
      if (coarsest == units.end() || tree_.is_finest(*coarsest)) break;
      const auto kids = tree_.children(*coarsest);
      units.erase(coarsest);
      units.insert(units.end(), kids.begin(), kids.end());
    }
    std::sort(units.begin(), units.end());
    return units;
  }

  void depth_first(std::size_t id, bool keep, std::vector<std::size_t>& order) {
    if (tree_.is_finest(id)) {
      FinestOutcome outcome = finest_posterior(prior_[id], region_values(tree_, id, y_));
      log_det_[id] = outcome.log_det;
      quad_[id] = outcome.quad;
      tracker_.add(outcome.atilde.bytes());
      store_.park(id, std::move(outcome.atilde));
    } else {
      const auto kids = tree_.children(id);
      for (std::size_t c : kids) depth_first(c, keep, order);
      std::vector<AtildeSet> sets;
      for (std::size_t c : kids) sets.push_back(store_.fetch(c));
      AtildeSet acc = sum_sets(std::move(sets), tracker_);
      const std::size_t before = acc.bytes();
      MergeOutcome outcome = merge_region(prior_[id], std::move(acc), keep, label(tree_, id));
      tracker_.release(before - outcome.atilde.bytes());
      log_det_[id] = outcome.log_det;
      quad_[id] = outcome.quad;
      if (keep) kept_[id] = std::move(outcome.kept);
      if (tree_.level_of(id) > 1) store_.park(id, std::move(outcome.atilde));
    }
    done_[id] = true;
    order.push_back(id);
  }

  /// Per-worker sums in region order, combined at worker 0 in worker order.
  std::pair<double, double> reduce() {
    std::vector<std::size_t> mine = stats_.processed;
    std::sort(mine.begin(), mine.end());
    double d = 0.0, u = 0.0;
    for (std::size_t id : mine) {
      d += log_det_[id];
      u += quad_[id];
    }
    const std::uint64_t tag = make_tag(Phase::reduce);
    if (me_ != 0) {
      wire::Writer w;
      w.put(d);
      w.put(u);
      t_.send(0, tag, w.take());
      return {d, u};
    }
    for (int w = 1; w < t_.size(); ++w) {
      const std::string bytes = t_.recv(w, tag);
      wire::Reader r(bytes);
      d += r.get<double>();
      u += r.get<double>();
    }
    return {d, u};
  }

  /// Holder of a region after the ascending pass; finest regions stay with their owner.
  int holder(std::size_t region) const { return plan_.merges[region].holder; }

  void predict(WorkerReport& report) {
    const int levels = tree_.levels();
    std::vector<std::optional<ChainRow>> rows(tree_.region_count());
    const auto chain_of = [&](std::size_t id) {
      std::vector<const ChainRow*> chain;
      for (std::size_t a : tree_.ancestors(id)) chain.push_back(&*rows[a]);
      return chain;
    };

    for (int level = 1; level < levels; ++level) {
      const std::size_t begin = tree_.level_begin(level);
      const std::size_t end = begin + tree_.level_size(level);

      // Chains of parents held elsewhere.
      std::set<std::size_t> needed;
      for (std::size_t id = begin; id < end; ++id)
        if (in_set_[id] && holds(id) && level > 1 && holder(tree_.parent(id)) != me_)
          needed.insert(tree_.parent(id));
      for (std::size_t parent : needed) receive_chain(parent, rows);

      std::vector<std::size_t> mine;
      for (std::size_t id = begin; id < end; ++id)
        if (in_set_[id] && holds(id)) mine.push_back(id);
      lanes_.parallel_for(mine.size(), [&](std::size_t i) {
        rows[mine[i]] = chain_row(*kept_[mine[i]], chain_of(mine[i]));
      });

      for (std::size_t id : mine) {
        std::set<int> targets;
        for (std::size_t c : tree_.children(id))
          if (holder(c) != me_) targets.insert(holder(c));
        if (targets.empty()) continue;
        wire::Writer w;
        const auto ancestors = tree_.ancestors(id);
        w.put<std::uint64_t>(ancestors.size() + 1);
        for (std::size_t a : ancestors) {
          w.put<std::uint64_t>(a);
          put_row(w, *rows[a]);
        }
        w.put<std::uint64_t>(id);
        put_row(w, *rows[id]);
        const std::string bytes = w.take();
        for (int target : targets) t_.send(target, make_tag(Phase::chain, id), bytes);
      }
    }
    if (levels > 1) {
      std::set<std::size_t> needed;
      for (std::size_t f = stats_.range.begin; f < stats_.range.end; ++f) {
        const std::size_t parent = tree_.parent(tree_.finest_region(f));
        if (holder(parent) != me_) needed.insert(parent);
      }
      for (std::size_t parent : needed) receive_chain(parent, rows);
    }

    // Queries inside my finest regions; worker 0 also takes those outside the domain.
    std::vector<std::optional<std::size_t>> where;
    for (std::size_t i = 0; i < locations_->size(); ++i) {
      const auto finest = tree_.locate((*locations_)[i]);
      const bool mine = finest ? stats_.range.contains(*finest - tree_.level_begin(levels)) : me_ == 0;
      if (!mine) continue;
      report.indices.push_back(i);
      where.push_back(finest);
    }
    const std::size_t count = report.indices.size();
    PredictionResults& out = report.predictions;
    out.locations.resize(count);
    out.mean.assign(count, std::numeric_limits<double>::quiet_NaN());
    out.variance.assign(count, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t k = 0; k < count; ++k) out.locations[k] = (*locations_)[report.indices[k]];

    // One chain summary per region, alive only while its queries are predicted.
    std::map<std::size_t, std::vector<std::size_t>> by_region;
    for (std::size_t k = 0; k < count; ++k)
      if (where[k]) by_region[*where[k]].push_back(k);
    const std::vector<std::pair<std::size_t, std::vector<std::size_t>>> groups(by_region.begin(), by_region.end());
    lanes_.parallel_for(groups.size(), [&](std::size_t g) {
      const auto& [region, queries] = groups[g];
      const Vector values = region_values(tree_, region, y_);
      const ChainSummary summary = summarize_chain(chain_of(region));
      for (std::size_t k : queries) {
        const PointPrediction pp =
            predict_point(tree_, prior_, summary, region, values, params_, out.locations[k]);
        out.mean[k] = pp.mean;
        out.variance[k] = pp.variance;
      }
    });
  }

  void receive_chain(std::size_t parent, std::vector<std::optional<ChainRow>>& rows) {
    const std::string bytes = t_.recv(holder(parent), make_tag(Phase::chain, parent));
    wire::Reader r(bytes);
    const auto n = r.get<std::uint64_t>();
    for (std::uint64_t i = 0; i < n; ++i) {
      const auto id = static_cast<std::size_t>(r.get<std::uint64_t>());
      ChainRow row = get_row(r);
      if (!rows[id]) rows[id] = std::move(row);
    }
  }

  void assemble(std::vector<WorkerReport>& reports, ExecutionResult* out) const {
    const std::size_t queries = locations_ ? locations_->size() : 0;
    if (locations_) {
      out->combined.locations = *locations_;
      out->combined.mean.assign(queries, std::numeric_limits<double>::quiet_NaN());
      out->combined.variance.assign(queries, std::numeric_limits<double>::quiet_NaN());
    }
    for (WorkerReport& rep : reports) {
      out->peak_bytes = std::max(out->peak_bytes, rep.stats.peak_bytes);
      for (std::size_t k = 0; k < rep.indices.size(); ++k) {
        out->combined.mean[rep.indices[k]] = rep.predictions.mean[k];
        out->combined.variance[rep.indices[k]] = rep.predictions.variance[k];
      }
      out->workers.push_back(std::move(rep.stats));
      if (locations_) {
        out->predictions.push_back(std::move(rep.predictions));
        out->prediction_indices.push_back(std::move(rep.indices));
      }
    }
  }

  const PartitionTree& tree_;
  CovarianceParams params_;
  std::span<const double> y_;
  const PointList* locations_;
  const ExecutorOptions& options_;
  const WorkerAssignment& plan_;
  Transport& t_;
  int me_;
  LanePool lanes_;
  MemoryTracker tracker_;
  AtildeStore store_;
  std::vector<bool> in_set_;
  std::vector<char> done_;
  std::vector<Range> span_;
  PriorQuantities prior_;
  std::vector<double> log_det_;
  std::vector<double> quad_;
  std::vector<std::optional<RegionPosterior>> kept_;
  WorkerStats stats_;
};

}  // namespace

ExecutionResult run_parallel(const PartitionTree& tree, const CovarianceParams& params,
                             std::span<const double> y, const PointList* locations,
                             const ExecutorOptions& options) {
  if (!params.valid()) throw ConfigError("covariance parameters must satisfy ALPHA > 0, BETA > 0, TAU >= 0");
  const WorkerAssignment plan = WorkerAssignment::make(tree, options.workers, options.dynamic);
  ExecutionResult result;
  run_workers(options.transport, options.workers, [&](Transport& transport) {
    Worker worker(tree, params, y, locations, options, plan, transport);
    worker.run(&result);
  });
  return result;
}

}  // namespace mra
