#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "ergodic/error.hpp"
#include "ergodic/io.hpp"

namespace ergodic {

struct Step {
    std::int64_t t = 0;
    double reward = 0.0;
    double ret = 0.0;
};

/// One realization of a return process. Row 0 carries the initial return
/// as both reward and return; every later row satisfies
/// ret[k] - ret[k-1] - reward[k] == 0 exactly in floating point, because
/// the stored reward is the rounded difference of consecutive returns.
class Trajectory {
public:
    Trajectory() = default;

    explicit Trajectory(double initial_return)
    {
        if (!std::isfinite(initial_return))
            throw DomainError("Trajectory: non-finite initial return");
        steps_.push_back({0, initial_return, initial_return});
    }

    /// Appends a step whose return is `next_return`.
    void push_return(double next_return)
    {
        if (steps_.empty())
            throw DomainError("Trajectory: push on empty trajectory");
        if (!std::isfinite(next_return))
            throw DomainError("Trajectory: non-finite return at step " + std::to_string(steps_.size()));
        const Step& last = steps_.back();
        steps_.push_back({last.t + 1, next_return - last.ret, next_return});
    }

    /// Appends a step receiving `reward`; the realized reward may differ
    /// from the argument by rounding of the accumulated return.
    void push_reward(double reward) { push_return(back().ret + reward); }

    static Trajectory from_returns(std::span<const double> returns)
    {
        if (returns.empty())
            throw DomainError("Trajectory::from_returns: empty input");
        Trajectory traj(returns.front());
        for (std::size_t k = 1; k < returns.size(); ++k)
            traj.push_return(returns[k]);
        return traj;
    }

    /// Rebuilds from stored rows, checking the time-index and telescoping
    /// invariants.
    static Trajectory from_steps(std::vector<Step> steps)
    {
        if (steps.empty())
            throw DomainError("Trajectory::from_steps: empty input");
        for (std::size_t k = 0; k < steps.size(); ++k) {
            if (steps[k].t != static_cast<std::int64_t>(k))
                throw DomainError("Trajectory: time index " + std::to_string(steps[k].t) +
                                  " at row " + std::to_string(k));
            if (!std::isfinite(steps[k].reward) || !std::isfinite(steps[k].ret))
                throw DomainError("Trajectory: non-finite value at row " + std::to_string(k));
        }
        if (steps[0].reward != steps[0].ret)
            throw DomainError("Trajectory: row 0 must carry the initial return as reward");
        for (std::size_t k = 1; k < steps.size(); ++k)
            if (steps[k].ret - steps[k - 1].ret - steps[k].reward != 0.0)
                throw DomainError("Trajectory: telescoping violated at row " + std::to_string(k));
        Trajectory traj;
        traj.steps_ = std::move(steps);
        return traj;
    }

    std::span<const Step> steps() const noexcept { return steps_; }
    std::size_t size() const noexcept { return steps_.size(); }
    bool empty() const noexcept { return steps_.empty(); }
    /// Number of transitions (rows minus one).
    std::size_t horizon() const noexcept { return steps_.empty() ? 0 : steps_.size() - 1; }
    const Step& operator[](std::size_t k) const { return steps_[k]; }
    const Step& front() const { return steps_.front(); }
    const Step& back() const { return steps_.back(); }

    std::vector<double> returns() const
    {
        std::vector<double> out;
        out.reserve(steps_.size());
        for (const auto& s : steps_)
            out.push_back(s.ret);
        return out;
    }

    /// Rewards of rows 1..T (the transitions).
    std::vector<double> rewards() const
    {
        std::vector<double> out;
        if (steps_.size() > 1)
            out.reserve(steps_.size() - 1);
        for (std::size_t k = 1; k < steps_.size(); ++k)
            out.push_back(steps_[k].reward);
        return out;
    }

    /// Largest |R(t_k) - R(t_{k-1}) - r(t_k)|; zero for every trajectory this
    /// class can hold.
    double telescoping_defect() const
    {
        double worst = 0.0;
        for (std::size_t k = 1; k < steps_.size(); ++k)
            worst = std::max(worst, std::abs(steps_[k].ret - steps_[k - 1].ret - steps_[k].reward));
        return worst;
    }

    friend bool operator==(const Trajectory& a, const Trajectory& b)
    {
        if (a.steps_.size() != b.steps_.size())
            return false;
        for (std::size_t k = 0; k < a.steps_.size(); ++k) {
            const auto& x = a.steps_[k];
            const auto& y = b.steps_[k];
            if (x.t != y.t || x.reward != y.reward || x.ret != y.ret)
                return false;
        }
        return true;
    }

private:
    std::vector<Step> steps_;
};

// CSV: header `step,reward,return`, shortest round-trip float formatting.

inline void write_csv(std::ostream& out, const Trajectory& traj)
{
    out << "step,reward,return\n";
    for (const auto& s : traj.steps())
        out << s.t << ',' << io::format_double(s.reward) << ',' << io::format_double(s.ret) << '\n';
}

/// Long format with a leading `traj_id` column.
inline void write_ensemble_csv(std::ostream& out, std::span<const Trajectory> ensemble)
{
    out << "traj_id,step,reward,return\n";
    for (std::size_t i = 0; i < ensemble.size(); ++i)
        for (const auto& s : ensemble[i].steps())
            out << i << ',' << s.t << ',' << io::format_double(s.reward) << ','
                << io::format_double(s.ret) << '\n';
}

inline Trajectory read_csv(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line) || io::chomp(line) != "step,reward,return")
        throw DomainError("trajectory CSV: expected header 'step,reward,return'");
    std::vector<Step> steps;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        auto text = io::chomp(line);
        if (text.empty())
            continue;
        auto fields = io::split(text);
        if (fields.size() != 3)
            throw DomainError("trajectory CSV: expected 3 fields on line " + std::to_string(row));
        steps.push_back({io::parse_integer(fields[0]), io::parse_double(fields[1]),
                         io::parse_double(fields[2])});
    }
    return Trajectory::from_steps(std::move(steps));
}

inline std::vector<Trajectory> read_ensemble_csv(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line) || io::chomp(line) != "traj_id,step,reward,return")
        throw DomainError("ensemble CSV: expected header 'traj_id,step,reward,return'");
    std::vector<std::vector<Step>> rows;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        auto text = io::chomp(line);
        if (text.empty())
            continue;
        auto fields = io::split(text);
        if (fields.size() != 4)
            throw DomainError("ensemble CSV: expected 4 fields on line " + std::to_string(row));
        auto id = io::parse_integer(fields[0]);
        if (id < 0 || static_cast<std::size_t>(id) > rows.size())
            throw DomainError("ensemble CSV: traj_id out of order on line " + std::to_string(row));
        if (static_cast<std::size_t>(id) == rows.size())
            rows.emplace_back();
        rows[id].push_back({io::parse_integer(fields[1]), io::parse_double(fields[2]),
                            io::parse_double(fields[3])});
    }
    std::vector<Trajectory> out;
    out.reserve(rows.size());
    for (auto& r : rows)
        out.push_back(Trajectory::from_steps(std::move(r)));
    return out;
}

} // namespace ergodic
