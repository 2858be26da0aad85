#pragma once

#include <array>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ccp/core.hpp"
#include "ccp/dataset.hpp"
#include "ccp/kernel.hpp"

namespace ccp {

/// Regular grid of rigidity density values over an embedded space (2-D or 3-D).
struct DensityGrid {
    std::size_t n_dims = 2;
    std::array<double, 3> origin{};
    std::array<double, 3> spacing{};
    std::array<std::size_t, 3> dims{1, 1, 1};  // nodes per axis
    std::vector<double> values;                // x fastest, then y, then z
    double mu_max = 0.0;

    std::size_t index(std::size_t i, std::size_t j, std::size_t k = 0) const {
        return i + dims[0] * (j + dims[1] * k);
    }
    double at(std::size_t i, std::size_t j, std::size_t k = 0) const {
        return values[index(i, j, k)];
    }
    std::array<double, 3> node(std::size_t i, std::size_t j, std::size_t k = 0) const {
        return {origin[0] + static_cast<double>(i) * spacing[0],
                origin[1] + static_cast<double>(j) * spacing[1],
                origin[2] + static_cast<double>(k) * spacing[2]};
    }
};

/// Level-set mesh: line segments for 2-D grids, triangles for 3-D grids.
struct IsoMesh {
    std::size_t n_dims = 2;
    double isovalue = 0.0;
    std::vector<std::array<double, 3>> vertices;  // z = 0 in 2-D
    std::vector<std::array<std::size_t, 2>> segments;
    std::vector<std::array<std::size_t, 3>> triangles;
};

/// Kernel-sum density over a padded bounding-box grid (Eq.-of-the-module:
/// mu(x) = sum_m Phi(|x - x_m|)), no cutoff; eta comes from the selected
/// points' average minimum pairwise distance.
inline DensityGrid rigidity_density(const Matrix& points, const KernelConfig& kernel,
                                    std::vector<std::size_t> resolution, double padding,
                                    std::optional<int> class_filter = std::nullopt,
                                    const LabelVector* labels = nullptr) {
    const std::size_t N = points.cols();
    if (N != 2 && N != 3) throw std::invalid_argument("density grid supports 2 or 3 dims");
    if (padding < 0.0) throw std::invalid_argument("padding must be >= 0");
    if (resolution.size() == 1) resolution.assign(N, resolution[0]);
    if (resolution.size() != N) throw std::invalid_argument("resolution/axis count mismatch");
    for (std::size_t r : resolution)
        if (r < 2 || r > 256)
            throw std::invalid_argument("resolution per axis must be in [2,256]");

    Matrix selected;
    if (class_filter) {
        if (!labels || labels->size() != points.rows())
            throw std::invalid_argument("class filter requires matching labels");
        std::vector<std::size_t> keep;
        for (std::size_t m = 0; m < points.rows(); ++m)
            if (labels->labels[m] == *class_filter) keep.push_back(m);
        selected = Matrix(keep.size(), N);
        for (std::size_t r = 0; r < keep.size(); ++r)
            for (std::size_t c = 0; c < N; ++c) selected(r, c) = points(keep[r], c);
    } else {
        selected = points;
    }
    const std::size_t M = selected.rows();
    if (M < 2) throw std::invalid_argument("need at least 2 selected points");

    std::array<double, 3> lo{0, 0, 0}, hi{0, 0, 0};
    for (std::size_t c = 0; c < N; ++c) {
        lo[c] = hi[c] = selected(0, c);
        for (std::size_t m = 1; m < M; ++m) {
            lo[c] = std::min(lo[c], selected(m, c));
            hi[c] = std::max(hi[c], selected(m, c));
        }
    }
    double diag = 0.0;
    for (std::size_t c = 0; c < N; ++c) diag += (hi[c] - lo[c]) * (hi[c] - lo[c]);
    diag = std::sqrt(diag);
    const double pad = diag > 0.0 ? padding * diag : 1.0;

    DensityGrid grid;
    grid.n_dims = N;
    for (std::size_t c = 0; c < N; ++c) {
        double a = lo[c] - pad, b = hi[c] + pad;
        if (a == b) {  // flat axis
            a -= 0.5;
            b += 0.5;
        }
        grid.origin[c] = a;
        grid.dims[c] = resolution[c];
        grid.spacing[c] = (b - a) / static_cast<double>(resolution[c] - 1);
    }

    const double eta = cluster_scale_eta(selected);
    const double inf = std::numeric_limits<double>::infinity();
    const std::size_t total = grid.dims[0] * grid.dims[1] * grid.dims[2];
    grid.values.assign(total, 0.0);
    parallel_for(total, [&](std::size_t idx) {
        const std::size_t i = idx % grid.dims[0];
        const std::size_t j = (idx / grid.dims[0]) % grid.dims[1];
        const std::size_t k = idx / (grid.dims[0] * grid.dims[1]);
        const auto p = grid.node(i, j, k);
        double sum = 0.0;
        for (std::size_t m = 0; m < M; ++m) {
            double d2 = 0.0;
            for (std::size_t c = 0; c < N; ++c) {
                const double d = p[c] - selected(m, c);
                d2 += d * d;
            }
            sum += kernel_eval(std::sqrt(d2), kernel.family, kernel.kappa, kernel.tau,
                               eta, inf);
        }
        grid.values[idx] = sum;
    });
    grid.mu_max = *std::max_element(grid.values.begin(), grid.values.end());
    return grid;
}

namespace detail {

// Pairs the crossings of one quad face. Corners are given in cyclic order
// c0..c3 with edges e0=(c0,c1), e1=(c1,c2), e2=(c2,c3), e3=(c3,c0); w = value
// minus isolevel, inside means w > 0. The ambiguous two-diagonal case is
// settled by the sign of the bilinear saddle (asymptotic decider).
inline void pair_face_crossings(const std::array<double, 4>& w,
                                std::array<std::array<int, 2>, 2>& pairs, int& n_pairs) {
    n_pairs = 0;
    const std::array<bool, 4> in{w[0] > 0.0, w[1] > 0.0, w[2] > 0.0, w[3] > 0.0};
    std::array<bool, 4> crossed;
    int n_cross = 0;
    for (int e = 0; e < 4; ++e) {
        crossed[e] = in[e] != in[(e + 1) % 4];
        if (crossed[e]) ++n_cross;
    }
    if (n_cross == 0) return;
    if (n_cross == 2) {
        std::array<int, 2> es;
        int k = 0;
        for (int e = 0; e < 4; ++e)
            if (crossed[e]) es[k++] = e;
        pairs[n_pairs++] = es;
        return;
    }
    // all four edges cross: diagonal corners share a sign
    const double denom = w[0] + w[2] - w[1] - w[3];
    const double saddle_num = w[0] * w[2] - w[1] * w[3];
    const bool positive_connected = denom != 0.0 && saddle_num / denom > 0.0;
    // edges adjacent to corner c: (c-1 mod 4, c)
    auto around = [&](int corner) {
        pairs[n_pairs++] = {(corner + 3) % 4, corner};
    };
    if (in[0]) {  // inside = {c0, c2}
        if (positive_connected) {
            around(1);
            around(3);
        } else {
            around(0);
            around(2);
        }
    } else {  // inside = {c1, c3}
        if (positive_connected) {
            around(0);
            around(2);
        } else {
            around(1);
            around(3);
        }
    }
}

}  // namespace detail

/// Marching squares / marching cubes at level c * mu_max with linear edge
/// interpolation. Cell-face pairings depend only on shared face values, so the
/// 3-D mesh is consistent across neighboring cubes.
inline IsoMesh extract_isosurface(const DensityGrid& grid, double c) {
    if (!(c > 0.0) || !(c < 1.0)) throw std::invalid_argument("isovalue fraction must be in (0,1)");
    const double level = c * grid.mu_max;

    IsoMesh mesh;
    mesh.n_dims = grid.n_dims;
    mesh.isovalue = level;

    const auto& dims = grid.dims;
    // global edge bookkeeping: per axis, one slot per base node
    const std::size_t n_nodes = dims[0] * dims[1] * dims[2];
    std::array<std::vector<std::int64_t>, 3> edge_vertex;
    for (std::size_t a = 0; a < grid.n_dims; ++a) edge_vertex[a].assign(n_nodes, -1);

    auto node_value = [&](std::size_t i, std::size_t j, std::size_t k) {
        return grid.at(i, j, k);
    };

    // phase 1+2: find crossing edges in fixed order and number their vertices
    std::array<std::size_t, 3> step{1, dims[0], dims[0] * dims[1]};
    for (std::size_t a = 0; a < grid.n_dims; ++a) {
        for (std::size_t k = 0; k < dims[2]; ++k)
            for (std::size_t j = 0; j < dims[1]; ++j)
                for (std::size_t i = 0; i < dims[0]; ++i) {
                    std::array<std::size_t, 3> at{i, j, k};
                    if (at[a] + 1 >= dims[a]) continue;
                    const std::size_t idx = grid.index(i, j, k);
                    const double wa = grid.values[idx] - level;
                    const double wb = grid.values[idx + step[a]] - level;
                    if ((wa > 0.0) == (wb > 0.0)) continue;
                    const double t = wa / (wa - wb);
                    auto p = grid.node(i, j, k);
                    p[a] += t * grid.spacing[a];
                    edge_vertex[a][idx] = static_cast<std::int64_t>(mesh.vertices.size());
                    mesh.vertices.push_back(p);
                }
    }

    auto edge_id = [&](std::size_t axis, std::size_t i, std::size_t j, std::size_t k) {
        return edge_vertex[axis][grid.index(i, j, k)];
    };

    if (grid.n_dims == 2) {
        for (std::size_t j = 0; j + 1 < dims[1]; ++j)
            for (std::size_t i = 0; i + 1 < dims[0]; ++i) {
                // corners CCW: (i,j),(i+1,j),(i+1,j+1),(i,j+1)
                const std::array<double, 4> w{
                    node_value(i, j, 0) - level, node_value(i + 1, j, 0) - level,
                    node_value(i + 1, j + 1, 0) - level, node_value(i, j + 1, 0) - level};
                std::array<std::array<int, 2>, 2> pairs;
                int n_pairs = 0;
                detail::pair_face_crossings(w, pairs, n_pairs);
                // face edge -> global grid edge
                const std::array<std::int64_t, 4> ev{
                    edge_id(0, i, j, 0), edge_id(1, i + 1, j, 0), edge_id(0, i, j + 1, 0),
                    edge_id(1, i, j, 0)};
                for (int p = 0; p < n_pairs; ++p) {
                    const std::int64_t a = ev[static_cast<std::size_t>(pairs[p][0])];
                    const std::int64_t b = ev[static_cast<std::size_t>(pairs[p][1])];
                    mesh.segments.push_back({static_cast<std::size_t>(a),
                                             static_cast<std::size_t>(b)});
                }
            }
        return mesh;
    }

    // 3-D: per cube, pair crossings on the six faces and trace closed loops
    for (std::size_t k = 0; k + 1 < dims[2]; ++k)
        for (std::size_t j = 0; j + 1 < dims[1]; ++j)
            for (std::size_t i = 0; i + 1 < dims[0]; ++i) {
                double w[2][2][2];
                bool any_in = false, any_out = false;
                for (int dk = 0; dk < 2; ++dk)
                    for (int dj = 0; dj < 2; ++dj)
                        for (int di = 0; di < 2; ++di) {
                            const double v = node_value(i + static_cast<std::size_t>(di),
                                                        j + static_cast<std::size_t>(dj),
                                                        k + static_cast<std::size_t>(dk)) -
                                             level;
                            w[di][dj][dk] = v;
                            (v > 0.0 ? any_in : any_out) = true;
                        }
                if (!any_in || !any_out) continue;

                // collect links between global vertex ids
                std::vector<std::array<std::int64_t, 2>> links;
                auto corner_w = [&](std::size_t axis, int side, int u, int v) {
                    int d[3];
                    d[axis] = side;
                    d[(axis + 1) % 3] = u;
                    d[(axis + 2) % 3] = v;
                    return w[d[0]][d[1]][d[2]];
                };
                auto face_edge_vid = [&](std::size_t axis, int side, int fe) -> std::int64_t {
                    // face edges in cyclic order: (u @ v=0), (v @ u=1), (u @ v=1), (v @ u=0)
                    const std::size_t ua = (axis + 1) % 3, va = (axis + 2) % 3;
                    std::size_t pos[3] = {i, j, k};
                    pos[axis] += static_cast<std::size_t>(side);
                    std::size_t edge_axis;
                    if (fe == 0) {
                        edge_axis = ua;
                    } else if (fe == 1) {
                        edge_axis = va;
                        pos[ua] += 1;
                    } else if (fe == 2) {
                        edge_axis = ua;
                        pos[va] += 1;
                    } else {
                        edge_axis = va;
                    }
                    return edge_id(edge_axis, pos[0], pos[1], pos[2]);
                };
                for (std::size_t axis = 0; axis < 3; ++axis)
                    for (int side = 0; side < 2; ++side) {
                        const std::array<double, 4> fw{
                            corner_w(axis, side, 0, 0), corner_w(axis, side, 1, 0),
                            corner_w(axis, side, 1, 1), corner_w(axis, side, 0, 1)};
                        std::array<std::array<int, 2>, 2> pairs;
                        int n_pairs = 0;
                        detail::pair_face_crossings(fw, pairs, n_pairs);
                        for (int p = 0; p < n_pairs; ++p)
                            links.push_back({face_edge_vid(axis, side, pairs[p][0]),
                                             face_edge_vid(axis, side, pairs[p][1])});
                    }

                // trace loops: every vertex in a cube touches exactly two links
                std::map<std::int64_t, std::vector<std::size_t>> incident;
                for (std::size_t l = 0; l < links.size(); ++l) {
                    incident[links[l][0]].push_back(l);
                    incident[links[l][1]].push_back(l);
                }
                std::vector<bool> used(links.size(), false);
                for (std::size_t start = 0; start < links.size(); ++start) {
                    if (used[start]) continue;
                    std::vector<std::int64_t> loop{links[start][0], links[start][1]};
                    used[start] = true;
                    for (;;) {
                        const std::int64_t tail = loop.back();
                        std::size_t next_link = links.size();
                        for (std::size_t l : incident[tail])
                            if (!used[l]) {
                                next_link = l;
                                break;
                            }
                        if (next_link == links.size()) break;
                        used[next_link] = true;
                        const std::int64_t other = links[next_link][0] == tail
                                                       ? links[next_link][1]
                                                       : links[next_link][0];
                        if (other == loop.front()) break;
                        loop.push_back(other);
                    }
                    if (loop.size() < 3) continue;

                    // orient outward: Newell normal vs density gradient at centroid
                    std::array<double, 3> normal{0, 0, 0}, centroid{0, 0, 0};
                    for (std::size_t a = 0; a < loop.size(); ++a) {
                        const auto& p = mesh.vertices[static_cast<std::size_t>(loop[a])];
                        const auto& q =
                            mesh.vertices[static_cast<std::size_t>(loop[(a + 1) % loop.size()])];
                        normal[0] += (p[1] - q[1]) * (p[2] + q[2]);
                        normal[1] += (p[2] - q[2]) * (p[0] + q[0]);
                        normal[2] += (p[0] - q[0]) * (p[1] + q[1]);
                        for (int cdim = 0; cdim < 3; ++cdim) centroid[cdim] += p[cdim];
                    }
                    for (int cdim = 0; cdim < 3; ++cdim)
                        centroid[cdim] /= static_cast<double>(loop.size());
                    // trilinear gradient at the centroid's local coordinates
                    double f[3];
                    f[0] = (centroid[0] - grid.node(i, j, k)[0]) / grid.spacing[0];
                    f[1] = (centroid[1] - grid.node(i, j, k)[1]) / grid.spacing[1];
                    f[2] = (centroid[2] - grid.node(i, j, k)[2]) / grid.spacing[2];
                    std::array<double, 3> gradient{0, 0, 0};
                    for (int di = 0; di < 2; ++di)
                        for (int dj = 0; dj < 2; ++dj)
                            for (int dk = 0; dk < 2; ++dk) {
                                const double val = w[di][dj][dk];
                                const double gx = (di ? 1.0 : -1.0) *
                                                  (dj ? f[1] : 1 - f[1]) *
                                                  (dk ? f[2] : 1 - f[2]);
                                const double gy = (dj ? 1.0 : -1.0) *
                                                  (di ? f[0] : 1 - f[0]) *
                                                  (dk ? f[2] : 1 - f[2]);
                                const double gz = (dk ? 1.0 : -1.0) *
                                                  (di ? f[0] : 1 - f[0]) *
                                                  (dj ? f[1] : 1 - f[1]);
                                gradient[0] += val * gx / grid.spacing[0];
                                gradient[1] += val * gy / grid.spacing[1];
                                gradient[2] += val * gz / grid.spacing[2];
                            }
                    const double dot = normal[0] * gradient[0] + normal[1] * gradient[1] +
                                       normal[2] * gradient[2];
                    if (dot > 0.0) std::reverse(loop.begin(), loop.end());

                    for (std::size_t a = 1; a + 1 < loop.size(); ++a)
                        mesh.triangles.push_back({static_cast<std::size_t>(loop[0]),
                                                  static_cast<std::size_t>(loop[a]),
                                                  static_cast<std::size_t>(loop[a + 1])});
                }
            }
    return mesh;
}

// ---- exports ----

/// Wavefront OBJ (3-D meshes): v/f records with 1-based indices. Optional
/// per-vertex labels (nearest data point's class) go out as comment lines.
inline void save_mesh_obj(const std::string& path, const IsoMesh& mesh,
                          const std::vector<int>* vertex_labels = nullptr) {
    if (mesh.n_dims != 3) throw std::invalid_argument("OBJ export is for 3-D meshes");
    std::ofstream out(path);
    if (!out) throw DataError("cannot write file: " + path);
    char buf[128];
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
        if (vertex_labels) out << "# label " << (*vertex_labels)[v] << '\n';
        std::snprintf(buf, sizeof buf, "v %.17g %.17g %.17g\n", mesh.vertices[v][0],
                      mesh.vertices[v][1], mesh.vertices[v][2]);
        out << buf;
    }
    for (const auto& t : mesh.triangles)
        out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
}

/// 2-D contour segments as CSV rows seg_id,x,y (two rows per segment).
inline void save_contour_csv(const std::string& path, const IsoMesh& mesh) {
    if (mesh.n_dims != 2) throw std::invalid_argument("contour CSV export is for 2-D meshes");
    std::ofstream out(path);
    if (!out) throw DataError("cannot write file: " + path);
    out << "seg_id,x,y\n";
    char buf[96];
    for (std::size_t s = 0; s < mesh.segments.size(); ++s)
        for (std::size_t e = 0; e < 2; ++e) {
            const auto& p = mesh.vertices[mesh.segments[s][e]];
            std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", s, p[0], p[1]);
            out << buf;
        }
}

inline void save_grid_csv(const std::string& path, const DensityGrid& grid) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write file: " + path);
    out << (grid.n_dims == 2 ? "x,y,mu\n" : "x,y,z,mu\n");
    char buf[160];
    for (std::size_t k = 0; k < grid.dims[2]; ++k)
        for (std::size_t j = 0; j < grid.dims[1]; ++j)
            for (std::size_t i = 0; i < grid.dims[0]; ++i) {
                const auto p = grid.node(i, j, k);
                if (grid.n_dims == 2) {
                    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", p[0], p[1],
                                  grid.at(i, j, k));
                } else {
                    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", p[0], p[1],
                                  p[2], grid.at(i, j, k));
                }
                out << buf;
            }
}

// Binary layout: magic "CCPG", u32 ndims, u32 dims[ndims], f64 origin[ndims],
// f64 spacing[ndims], f64 values.
inline void save_grid_binary(const std::string& path, const DensityGrid& grid) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write file: " + path);
    out.write("CCPG", 4);
    const std::uint32_t nd = static_cast<std::uint32_t>(grid.n_dims);
    out.write(reinterpret_cast<const char*>(&nd), 4);
    for (std::size_t a = 0; a < grid.n_dims; ++a) {
        const std::uint32_t d = static_cast<std::uint32_t>(grid.dims[a]);
        out.write(reinterpret_cast<const char*>(&d), 4);
    }
    out.write(reinterpret_cast<const char*>(grid.origin.data()),
              static_cast<std::streamsize>(grid.n_dims * sizeof(double)));
    out.write(reinterpret_cast<const char*>(grid.spacing.data()),
              static_cast<std::streamsize>(grid.n_dims * sizeof(double)));
    out.write(reinterpret_cast<const char*>(grid.values.data()),
              static_cast<std::streamsize>(grid.values.size() * sizeof(double)));
}

}  // namespace ccp
