#include "cellevac/motion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cellevac {

WallIndex::WallIndex(const Scenario& scn, double query_range) {
    double minx = scn.boundary[0].x, maxx = scn.boundary[0].x;
    double miny = scn.boundary[0].y, maxy = scn.boundary[0].y;
    for (const Vec2& v : scn.boundary) {
        minx = std::min(minx, v.x);
        maxx = std::max(maxx, v.x);
        miny = std::min(miny, v.y);
        maxy = std::max(maxy, v.y);
    }
    cell_ = 2.0;
    minx_ = minx - cell_;
    miny_ = miny - cell_;
    nx_ = static_cast<int>((maxx - minx_) / cell_) + 2;
    ny_ = static_cast<int>((maxy - miny_) / cell_) + 2;
    buckets_.assign(static_cast<size_t>(nx_) * ny_, {});

    for (int w = 0; w < static_cast<int>(scn.walls.size()); ++w) {
        const Segment& s = scn.walls[w];
        for (int iy = 0; iy < ny_; ++iy) {
            for (int ix = 0; ix < nx_; ++ix) {
                // Conservative: bucket center within range + half-diagonal.
                Vec2 center{minx_ + (ix + 0.5) * cell_, miny_ + (iy + 0.5) * cell_};
                double reach = query_range + cell_ * 0.7071 + 1e-9;
                if (point_segment_distance(center, s) <= reach)
                    buckets_[static_cast<size_t>(iy) * nx_ + ix].push_back(w);
            }
        }
    }
}

const std::vector<int>& WallIndex::walls_near(Vec2 p) const {
    if (buckets_.empty()) return empty_;
    int ix = static_cast<int>((p.x - minx_) / cell_);
    int iy = static_cast<int>((p.y - miny_) / cell_);
    if (ix < 0 || ix >= nx_ || iy < 0 || iy >= ny_) return empty_;
    return buckets_[static_cast<size_t>(iy) * nx_ + ix];
}

int64_t SimState::evacuated_total() const {
    int64_t acc = 0;
    for (int64_t c : evac_count) acc += c;
    return acc;
}

SimState make_sim_state(const Scenario& scn, std::vector<PedestrianState> initial) {
    SimState st;
    st.peds = std::move(initial);
    st.active.resize(st.peds.size());
    for (size_t i = 0; i < st.peds.size(); ++i) st.active[i] = static_cast<int>(i);
    st.evac_count.assign(scn.exits.size(), 0);
    st.exit_blocked.assign(scn.exits.size(), 0);
    for (const ExitGate& e : scn.exits)
        st.exit_blocked[e.id - 1] = e.blocked ? 1 : 0;
    st.inject_backlog.assign(scn.exits.size(), 0);
    st.spawned = static_cast<int64_t>(st.peds.size());
    st.last_measure_counts.assign(scn.exits.size(), 0);
    return st;
}

namespace {

// Flat uniform hash over active pedestrians; bucket contents stay in
// ascending id order so force accumulation order is reproducible.
struct PedHash {
    double minx, miny, cell;
    int nx, ny;
    std::vector<int> heads;   // bucket -> start offset
    std::vector<int> entries; // ped ids grouped by bucket

    void build(const SimState& st, double cell_size) {
        cell = cell_size;
        minx = std::numeric_limits<double>::infinity();
        miny = std::numeric_limits<double>::infinity();
        double maxx = -minx, maxy = -miny;
        if (st.active.empty()) {
            nx = ny = 1;
            heads.assign(2, 0);
            entries.clear();
            minx = miny = 0.0;
            return;
        }
        for (int id : st.active) {
            const Vec2& p = st.peds[id].position;
            minx = std::min(minx, p.x);
            miny = std::min(miny, p.y);
            maxx = std::max(maxx, p.x);
            maxy = std::max(maxy, p.y);
        }
        nx = static_cast<int>((maxx - minx) / cell) + 1;
        ny = static_cast<int>((maxy - miny) / cell) + 1;
        heads.assign(static_cast<size_t>(nx) * ny + 1, 0);
        entries.resize(st.active.size());
        auto bucket_of = [&](Vec2 p) {
            int ix = std::min(nx - 1, static_cast<int>((p.x - minx) / cell));
            int iy = std::min(ny - 1, static_cast<int>((p.y - miny) / cell));
            return static_cast<size_t>(iy) * nx + ix;
        };
        for (int id : st.active) heads[bucket_of(st.peds[id].position) + 1]++;
        for (size_t b = 1; b < heads.size(); ++b) heads[b] += heads[b - 1];
        std::vector<int> cursor(heads.begin(), heads.end() - 1);
        for (int id : st.active)
            entries[cursor[bucket_of(st.peds[id].position)]++] = id;
    }

    template <typename F>
    void for_neighbors(Vec2 p, F&& f) const {
        int cx = static_cast<int>((p.x - minx) / cell);
        int cy = static_cast<int>((p.y - miny) / cell);
        for (int iy = cy - 1; iy <= cy + 1; ++iy) {
            if (iy < 0 || iy >= ny) continue;
            for (int ix = cx - 1; ix <= cx + 1; ++ix) {
                if (ix < 0 || ix >= nx) continue;
                size_t b = static_cast<size_t>(iy) * nx + ix;
                for (int k = heads[b]; k < heads[b + 1]; ++k) f(entries[k]);
            }
        }
    }
};

bool in_blocked_band(Vec2 p, const SimState& st, const Scenario& scn,
                     const MotionParams& mp) {
    for (size_t e = 0; e < scn.exits.size(); ++e) {
        if (!st.exit_blocked[e]) continue;
        if (point_segment_distance(p, scn.exits[e].gate_segment) <= mp.blocked_band_depth)
            return true;
    }
    return false;
}

} // namespace

void sfm_step(SimState& state, const Scenario& scn, const WallIndex& walls,
              const MotionParams& mp) {
    const double dt = mp.dt;
    const double diameter = 2.0 * mp.body_radius;
    const double inv_mass = 1.0 / mp.mass;

    static thread_local PedHash hash;
    hash.build(state, mp.neighbor_cutoff);

    const double density_r2 = mp.density_speed_radius * mp.density_speed_radius;
    const double density_area = M_PI * density_r2;

    // Pass 1: forces from a read-only snapshot.
    std::vector<Vec2> new_vel(state.active.size());
    for (size_t k = 0; k < state.active.size(); ++k) {
        const PedestrianState& ped = state.peds[state.active[k]];
        if (ped.target_exit < 1 || ped.target_exit > scn.n_exits())
            throw SimError("sfm_step: pedestrian " + std::to_string(ped.id) +
                           " has no target exit");
        const ExitGate& gate = scn.exits[ped.target_exit - 1];

        Vec2 contact_accel{0.0, 0.0};
        int crowd_count = 0;
        hash.for_neighbors(ped.position, [&](int j) {
            if (j == ped.id) return;
            const PedestrianState& other = state.peds[j];
            Vec2 delta = ped.position - other.position;
            double d = delta.norm();
            if (d > mp.neighbor_cutoff) return;
            if (d * d <= density_r2) crowd_count++;
            if (d < 1e-9) {
                // Coincident bodies: deterministic separation along +x.
                delta = {1e-9, 0.0};
                d = 1e-9;
            }
            Vec2 n = delta / d;
            double gap = diameter - d;
            Vec2 force{0.0, 0.0};
            double social_arg = gap / mp.repulsion_range;
            if (social_arg > -12.0)
                force += n * (mp.repulsion_strength * std::exp(social_arg));
            if (gap > 0.0) {
                force += n * (mp.body_force * gap);
                Vec2 t = n.perp();
                double dv_t = (other.velocity - ped.velocity).dot(t);
                force += t * (mp.sliding_friction * gap * dv_t);
            }
            contact_accel += force * inv_mass;
        });

        double v0 = ped.preferred_speed;
        if (crowd_count > 0) {
            double rho = crowd_count / density_area;
            double slack = 1.0 / rho - 1.0 / mp.jam_density;
            double factor =
                slack > 0.0 ? 1.0 - std::exp(-mp.weidmann_gamma * slack) : 0.0;
            v0 *= std::max(mp.min_speed_factor, factor);
        }
        if (in_blocked_band(ped.position, state, scn, mp)) v0 *= mp.blocked_speed_factor;

        Vec2 goal = closest_point_on_segment(ped.position, gate.gate_segment);
        Vec2 to_goal = goal - ped.position;
        Vec2 dir = to_goal.norm() > 1e-9 ? to_goal.normalized() : ped.velocity.normalized();

        Vec2 accel = (dir * v0 - ped.velocity) / mp.tau + contact_accel;

        for (int w : walls.walls_near(ped.position)) {
            const Segment& seg = scn.walls[w];
            Vec2 cp = closest_point_on_segment(ped.position, seg);
            Vec2 delta = ped.position - cp;
            double d = delta.norm();
            if (d > mp.neighbor_cutoff) continue;
            if (d < 1e-9) continue;
            Vec2 n = delta / d;
            double gap = mp.body_radius - d;
            Vec2 force{0.0, 0.0};
            double social_arg = gap / mp.repulsion_range;
            if (social_arg > -12.0)
                force += n * (mp.repulsion_strength * std::exp(social_arg));
            if (gap > 0.0) {
                force += n * (mp.body_force * gap);
                Vec2 t = n.perp();
                double v_t = ped.velocity.dot(t);
                force -= t * (mp.sliding_friction * gap * v_t);
            }
            accel += force * inv_mass;
        }

        Vec2 v = ped.velocity + accel * dt;
        // Contact pressure cannot extrude a body through a crowd faster than
        // the crowd-adjusted walking speed allows.
        double cap = mp.speed_cap_factor * v0;
        double speed = v.norm();
        if (speed > cap) v = v * (cap / speed);
        new_vel[k] = v;
    }

    // Pass 2: advance, detect gate crossings and wall clamping.
    double t_next = state.clock + dt;
    std::vector<int> still_active;
    still_active.reserve(state.active.size());
    for (size_t k = 0; k < state.active.size(); ++k) {
        PedestrianState& ped = state.peds[state.active[k]];
        Vec2 old_pos = ped.position;
        Vec2 new_pos = old_pos + new_vel[k] * dt;

        if (!std::isfinite(new_pos.x) || !std::isfinite(new_pos.y) ||
            !std::isfinite(new_vel[k].x) || !std::isfinite(new_vel[k].y)) {
            throw SimError("sfm_step: numeric divergence at t=" +
                           std::to_string(state.clock) + " ped=" + std::to_string(ped.id));
        }

        int crossed = 0;
        for (const ExitGate& gate : scn.exits) {
            if (segments_intersect(old_pos, new_pos, gate.gate_segment.a,
                                   gate.gate_segment.b)) {
                crossed = gate.id;
                break;
            }
        }
        if (crossed != 0) {
            ped.evacuated_at = t_next;
            ped.position = new_pos;
            ped.velocity = new_vel[k];
            state.evac_count[crossed - 1]++;
            continue;
        }

        // Keep pedestrians inside: cancel moves that would tunnel a wall.
        bool hit_wall = false;
        for (int w : walls.walls_near(old_pos)) {
            const Segment& seg = scn.walls[w];
            if (segments_intersect(old_pos, new_pos, seg.a, seg.b)) {
                hit_wall = true;
                break;
            }
        }
        if (hit_wall) {
            new_pos = old_pos;
            new_vel[k] = {0.0, 0.0};
        }

        ped.position = new_pos;
        ped.velocity = new_vel[k];
        still_active.push_back(ped.id);
    }
    state.active = std::move(still_active);
    state.step += 1;
    state.clock = t_next;
}

std::vector<int> inject_at(SimState& state, const Scenario& scn, Vec2 pos,
                           double rate_per_s, double dt, Rng& rng,
                           const MotionParams& mp, int64_t& backlog) {
    int fresh = rng.poisson(rate_per_s * dt);
    int64_t want = backlog + fresh;
    std::vector<int> created;
    if (want == 0) return created;

    const double diameter = 2.0 * mp.body_radius;
    const double jitter_radius = 1.5;

    // Single pass over actives near the entry spot; attempts check only these.
    std::vector<int> local;
    for (int id : state.active)
        if ((state.peds[id].position - pos).norm() < jitter_radius + diameter)
            local.push_back(id);
    // Saturated entry area: arrivals queue upstream until space frees.
    const double area = M_PI * jitter_radius * jitter_radius;
    if (static_cast<double>(local.size()) > 4.0 * area) {
        backlog = want;
        return created;
    }

    int64_t place_budget = std::min<int64_t>(want, 10);
    int64_t placed_count = 0;
    for (int64_t a = 0; a < place_budget; ++a) {
        bool placed = false;
        for (int attempt = 0; attempt < 30 && !placed; ++attempt) {
            double ang = rng.uniform(0.0, 2.0 * M_PI);
            double rad = attempt == 0 ? 0.0 : jitter_radius * std::sqrt(rng.uniform());
            Vec2 p = pos + Vec2{std::cos(ang), std::sin(ang)} * rad;
            if (!point_in_polygon(p, scn.boundary)) continue;
            if (distance_to_polygon_outline(p, scn.boundary) < mp.body_radius) continue;
            bool conflict = false;
            for (int id : local) {
                if ((state.peds[id].position - p).norm() < diameter * 0.9) {
                    conflict = true;
                    break;
                }
            }
            for (int id : created) {
                if (conflict) break;
                if ((state.peds[id].position - p).norm() < diameter * 0.9) conflict = true;
            }
            if (conflict) continue;

            PedestrianState ped;
            ped.id = static_cast<int>(state.peds.size());
            ped.position = p;
            ped.preferred_speed = rng.uniform(scn.speed_min, scn.speed_max);
            // Provisional target; the caller re-decides with the behavior model.
            int nearest = 1;
            double best = std::numeric_limits<double>::infinity();
            for (const ExitGate& g : scn.exits) {
                double d = distance_to_exit(p, g);
                if (d < best) {
                    best = d;
                    nearest = g.id;
                }
            }
            ped.target_exit = nearest;
            state.peds.push_back(ped);
            state.active.push_back(ped.id);
            state.injected += 1;
            created.push_back(ped.id);
            placed = true;
            placed_count += 1;
        }
        if (!placed) break;
    }
    backlog = want - placed_count;
    return created;
}

std::vector<int> inject_external_flow(SimState& state, const Scenario& scn,
                                      int exit_id, double rate_peds_per_min,
                                      double dt, Rng& rng, const MotionParams& mp) {
    const ExitGate& gate = scn.exits.at(exit_id - 1);
    if (!gate.entry_point)
        throw SimError("inject_external_flow: exit " + std::to_string(exit_id) +
                       " has no entry point");
    return inject_at(state, scn, *gate.entry_point, rate_peds_per_min / 60.0, dt,
                     rng, mp, state.inject_backlog[exit_id - 1]);
}

void block_exit(SimState& state, int exit_id) {
    if (exit_id < 1 || exit_id > static_cast<int>(state.exit_blocked.size()))
        throw SimError("block_exit: unknown exit id " + std::to_string(exit_id));
    state.exit_blocked[exit_id - 1] = 1;
}

void unblock_exit(SimState& state, int exit_id) {
    if (exit_id < 1 || exit_id > static_cast<int>(state.exit_blocked.size()))
        throw SimError("unblock_exit: unknown exit id " + std::to_string(exit_id));
    state.exit_blocked[exit_id - 1] = 0;
}

std::vector<int> cell_occupancy(const SimState& state, const Scenario& scn) {
    std::vector<int> occ(scn.n_cells(), 0);
    for (int id : state.active) {
        int cell = locate_cell(state.peds[id].position, scn);
        if (cell >= 1) occ[cell - 1]++;
    }
    return occ;
}

double exit_density_from_occupancy(const std::vector<int>& occupancy,
                                   const Scenario& scn, int exit_id) {
    const auto& cells = scn.measurement_cells[exit_id - 1];
    int count = 0;
    for (int cid : cells) count += occupancy[cid - 1];
    double area = scn.measurement_area[exit_id - 1];
    return area > 0.0 ? count / area : 0.0;
}

std::vector<DensitySample> measure(SimState& state, const Scenario& scn,
                                   double interval) {
    std::vector<int> occ = cell_occupancy(state, scn);
    std::vector<DensitySample> out;
    out.reserve(scn.exits.size());
    for (const ExitGate& gate : scn.exits) {
        DensitySample s;
        s.time = state.clock;
        s.exit_id = gate.id;
        s.density = exit_density_from_occupancy(occ, scn, gate.id);
        int64_t crossings = state.evac_count[gate.id - 1] -
                            state.last_measure_counts[gate.id - 1];
        s.flow = interval > 0.0 ? static_cast<double>(crossings) / interval : 0.0;
        out.push_back(s);
        state.last_measure_counts[gate.id - 1] = state.evac_count[gate.id - 1];
    }
    state.last_measure_time = state.clock;
    return out;
}

bool conservation_holds(const SimState& state) {
    return state.spawned + state.injected ==
           state.evacuated_total() + static_cast<int64_t>(state.active.size());
}

} // namespace cellevac
