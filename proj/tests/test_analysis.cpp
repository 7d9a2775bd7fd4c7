#include <cmath>

#include <gtest/gtest.h>

#include "adapt/analysis.hpp"
#include "adapt/rng.hpp"

using namespace adapt;

namespace {

std::vector<double> random_permutation_ranks(std::size_t n, Rng& rng) {
    std::vector<double> r;
    for (auto i : rng.permutation(n)) r.push_back(static_cast<double>(i + 1));
    return r;
}

DistanceMatrix from_points(const Eigen::MatrixXd& p) {
    DistanceMatrix dm{{}, Eigen::MatrixXd::Zero(p.rows(), p.rows())};
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        dm.ids.push_back("t" + std::to_string(i));
        for (Eigen::Index j = 0; j < p.rows(); ++j) dm.d(i, j) = (p.row(i) - p.row(j)).norm();
    }
    return dm;
}

// Residual of the best rigid (rotation or reflection plus translation) fit of a onto b.
double procrustes_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    const Eigen::MatrixXd ac = a.rowwise() - a.colwise().mean();
    const Eigen::MatrixXd bc = b.rowwise() - b.colwise().mean();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(ac.transpose() * bc, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::MatrixXd r = svd.matrixU() * svd.matrixV().transpose();
    return (ac * r - bc).norm();
}

}  // namespace

TEST(Ranks, Examples) {
    EXPECT_EQ(rank_profile({0.9, 0.5, 0.7}).ranks, (std::vector<double>{1, 3, 2}));
    EXPECT_EQ(rank_profile({0.5, 0.5}).ranks, (std::vector<double>{1.5, 1.5}));
    EXPECT_EQ(rank_profile({0.1, 0.9, 0.9, 0.9}).ranks, (std::vector<double>{4, 2, 2, 2}));
    EXPECT_THROW(rank_profile({0.5}), DataError);
    EXPECT_THROW(rank_profile({0.5, std::nan("")}), DataError);
}

TEST(Ranks, AgreeWithSortReference) {
    Rng rng(1);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> acc;
        for (int i = 0; i < 10; ++i) acc.push_back(std::round(rng.uniform() * 8) / 8);  // forces ties
        const auto ranks = rank_profile(acc).ranks;
        for (std::size_t i = 0; i < acc.size(); ++i) {
            double better = 0, equal = 0;
            for (double b : acc) {
                better += b > acc[i];
                equal += b == acc[i];
            }
            EXPECT_EQ(ranks[i], better + (equal + 1) / 2) << i;
        }
    }
}

TEST(Ranks, InvariantUnderMonotoneMaps) {
    Rng rng(2);
    std::vector<double> acc, mapped;
    for (int i = 0; i < 12; ++i) acc.push_back(rng.uniform());
    for (double a : acc) mapped.push_back(std::exp(3 * a) - 7);
    EXPECT_EQ(rank_profile(acc).ranks, rank_profile(mapped).ranks);
}

TEST(Spearman, AnchorsAndClosedForm) {
    const std::vector<double> r{1, 2, 3, 4, 5};
    EXPECT_EQ(spearman_rho(r, r), 1.0);
    EXPECT_EQ(spearman_rho(r, {5, 4, 3, 2, 1}), -1.0);
    Rng rng(3);
    for (int t = 0; t < 100; ++t) {
        const auto a = random_permutation_ranks(5, rng), b = random_permutation_ranks(5, rng);
        double d2 = 0;
        for (std::size_t i = 0; i < 5; ++i) d2 += (a[i] - b[i]) * (a[i] - b[i]);
        EXPECT_NEAR(spearman_rho(a, b), 1 - 6 * d2 / (5 * 24), 1e-12);
    }
    EXPECT_THROW(spearman_rho({1, 1, 1}, {1, 2, 3}), DataError);
    EXPECT_THROW(spearman_rho({1, 2}, {1, 2, 3}), DataError);
}

TEST(Distance, Anchors) {
    const std::vector<double> r{1, 2, 3, 4};
    EXPECT_EQ(rank_distance(r, r), 0.0);
    EXPECT_EQ(rank_distance(r, {4, 3, 2, 1}), std::sqrt(2.0));
    // rho = 0: ranks (1,2,3,4) against (2,4,1,3) give sum d^2 = 10 -> 1 - 60/60.
    EXPECT_EQ(spearman_rho({1, 2, 3, 4}, {2, 4, 1, 3}), 0.0);
    EXPECT_EQ(rank_distance({1, 2, 3, 4}, {2, 4, 1, 3}), 1.0);
}

TEST(Distance, Properties) {
    Rng rng(4);
    for (int t = 0; t < 200; ++t) {
        const auto a = random_permutation_ranks(6, rng), b = random_permutation_ranks(6, rng);
        const double d = rank_distance(a, b);
        EXPECT_EQ(d, rank_distance(b, a));
        EXPECT_GE(d, 0.0);
        EXPECT_LE(d, std::sqrt(2.0));
        EXPECT_EQ(rank_distance(a, a), 0.0);
    }
}

TEST(Embed, EquilateralAndPair) {
    DistanceMatrix tri{{"a", "b", "c"}, Eigen::MatrixXd::Ones(3, 3) - Eigen::MatrixXd::Identity(3, 3)};
    const auto e = embed_2d(tri);
    for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j) EXPECT_NEAR((e.points.row(i) - e.points.row(j)).norm(), 1.0, 1e-6);
    EXPECT_NEAR(e.stress, 0.0, 1e-6);
    DistanceMatrix pair{{"a", "b"}, Eigen::MatrixXd::Ones(2, 2) - Eigen::MatrixXd::Identity(2, 2)};
    EXPECT_NEAR((embed_2d(pair).points.row(0) - embed_2d(pair).points.row(1)).norm(), 1.0, 1e-12);
}

TEST(Embed, RecoversPlanarConfiguration) {
    Eigen::MatrixXd p(4, 2);
    p << 0, 0, 3, 0.5, 1, 2, -1, 1.5;
    const auto e = embed_2d(from_points(p));
    EXPECT_LT(procrustes_error(e.points, p), 1e-6);
}

TEST(Embed, PermutationEquivariant) {
    Rng rng(5);
    Eigen::MatrixXd p(6, 3);
    for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = rng.normal();
    const auto dm = from_points(p);
    const auto perm = rng.permutation(6);
    DistanceMatrix pd{{}, Eigen::MatrixXd(6, 6)};
    for (int i = 0; i < 6; ++i) {
        pd.ids.push_back(dm.ids[perm[static_cast<std::size_t>(i)]]);
        for (int j = 0; j < 6; ++j)
            pd.d(i, j) = dm.d(static_cast<Eigen::Index>(perm[static_cast<std::size_t>(i)]), static_cast<Eigen::Index>(perm[static_cast<std::size_t>(j)]));
    }
    const auto a = embed_2d(dm), b = embed_2d(pd);
    for (int i = 0; i < 6; ++i)
        EXPECT_LT((b.points.row(i) - a.points.row(static_cast<Eigen::Index>(perm[static_cast<std::size_t>(i)]))).norm(), 1e-9);
    EXPECT_NEAR(a.stress, b.stress, 1e-12);
}

TEST(Embed, DegenerateAndInvalid) {
    DistanceMatrix zero{{"a", "b", "c"}, Eigen::MatrixXd::Zero(3, 3)};
    const auto e = embed_2d(zero);
    EXPECT_EQ(e.warnings.size(), 1u);
    EXPECT_TRUE(e.points.isZero(0));
    DistanceMatrix asym{{"a", "b"}, Eigen::MatrixXd::Zero(2, 2)};
    asym.d(0, 1) = 1;
    EXPECT_THROW(embed_2d(asym), DataError);
}

TEST(Report, IdenticalTasksCoincide) {
    ResultGrid g({"p0", "p1", "p2"}, {"x", "y", "z"});
    const double acc[3][3] = {{0.9, 0.9, 0.2}, {0.5, 0.5, 0.8}, {0.7, 0.7, 0.4}};
    for (std::size_t p = 0; p < 3; ++p)
        for (std::size_t t = 0; t < 3; ++t) g.accuracy[p][t] = acc[p][t];
    const auto r = similarity_report(g);
    EXPECT_EQ(r.distance.d(0, 1), 0.0);
    EXPECT_LT((r.embedding.points.row(0) - r.embedding.points.row(1)).norm(), 1e-6);
    EXPECT_GT(r.distance.d(0, 2), 1.0);
    const auto j = analysis_to_json(r, 42);
    EXPECT_EQ(j.at("schema"), "map-analysis/1");
    EXPECT_EQ(j.at("seed"), 42);
    EXPECT_EQ(j.at("cells"), 9);
    EXPECT_EQ(j.at("distance_matrix").size(), 3u);
    EXPECT_EQ(j.at("cross_domain_csv"), "pipeline,x,y,z\np0,90.00,90.00,20.00\np1,50.00,50.00,80.00\np2,70.00,70.00,40.00\n");
    EXPECT_EQ(g.column_best(), (std::vector<std::size_t>{0, 0, 1}));
}

TEST(Report, MissingCellNamesPipelineAndTask) {
    ResultGrid g({"p0", "p1"}, {"x", "y"});
    g.accuracy[0] = {0.1, 0.2};
    g.accuracy[1] = {0.3, std::nullopt};
    try {
        similarity_report(g);
        FAIL();
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("pipeline \"p1\", task \"y\""), std::string::npos);
    }
}
