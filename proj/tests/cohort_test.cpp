#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "psm/cohort.hpp"
#include "psm/random.hpp"
#include "psm/synth.hpp"

namespace {

using psm::Kind;
using psm::Role;

psm::Schema small_schema() {
    return psm::Schema({
        {"Age", Kind::continuous, Role::covariate, 18.0, "", false},
        {"Gender", Kind::binary, Role::treatment, std::nullopt, "", false},
        {"IDH1", Kind::binary, Role::covariate, std::nullopt, "", false},
        {"Grade", Kind::binary, Role::outcome, std::nullopt, "", false},
    });
}

const char* small_csv =
    "Age,Gender,IDH1,Grade\n"
    "45.2,1,1,0\n"
    "61.0,0,0,1\n"
    "38.7,1,1,0\n"
    "70.3,0,0,1\n"
    "52.1,0,1,0\n";

psm::Cohort load(const std::string& text, const psm::Schema& schema = small_schema()) {
    std::istringstream in(text);
    return psm::load_cohort(in, schema, "test.csv");
}

psm::ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const psm::Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return psm::ErrorCode::Io;
}

}

TEST(Cohort, LoadsFiveRowFixture) {
    const auto c = load(small_csv);
    EXPECT_EQ(c.size(), 5u);
    EXPECT_EQ(c.treatment(), (std::vector<double>{1, 0, 1, 0, 0}));
    EXPECT_EQ(c.outcomes(), (std::vector<double>{0, 1, 0, 1, 0}));
    EXPECT_DOUBLE_EQ(c.value(3, 0), 70.3);
}

TEST(Cohort, DescribeFiveRowFixture) {
    const auto d = psm::describe(load(small_csv), "Grade");
    EXPECT_EQ(d.stratum_sizes, (std::vector<std::size_t>{5, 3, 2}));
    const auto& gender = d.entry("Gender");
    EXPECT_EQ(gender.cells[0].count, 2u);
    EXPECT_DOUBLE_EQ(gender.cells[0].percent, 40.0);
    EXPECT_EQ(gender.cells[1].count, 2u);
    EXPECT_EQ(gender.cells[2].count, 0u);
    const auto& age = d.entry("Age");
    EXPECT_NEAR(age.cells[0].mean, (45.2 + 61.0 + 38.7 + 70.3 + 52.1) / 5, 1e-12);
    EXPECT_NEAR(age.cells[2].mean, 65.65, 1e-12);
    EXPECT_NEAR(age.cells[2].sd, std::sqrt(2 * 4.65 * 4.65), 1e-12);
    EXPECT_THROW(d.entry("Grade"), psm::Error);
}

TEST(Cohort, RejectsNonBinaryValue) {
    std::string bad = small_csv;
    bad.replace(bad.find("1,1,0\n"), 6, "2,1,0\n");
    EXPECT_EQ(code_of([&] { load(bad); }), psm::ErrorCode::BadValue);
}

TEST(Cohort, ErrorCarriesFileAndLine) {
    try {
        load("Age,Gender,IDH1,Grade\n45,1,1,0\n50,0,NA,1\n");
        FAIL();
    } catch (const psm::Error& e) {
        EXPECT_EQ(e.code(), psm::ErrorCode::BadValue);
        EXPECT_NE(std::string(e.what()).find("test.csv:3"), std::string::npos) << e.what();
    }
}

TEST(Cohort, RejectsAgeBelowMinimum) {
    EXPECT_EQ(code_of([] { load("Age,Gender,IDH1,Grade\n17,1,1,0\n50,0,0,1\n"); }), psm::ErrorCode::BadValue);
}

TEST(Cohort, MissingColumn) {
    EXPECT_EQ(code_of([] { load("Age,Gender,Grade\n45,1,0\n50,0,1\n"); }), psm::ErrorCode::MissingColumn);
}

TEST(Cohort, SingleArmAndTooSmall) {
    EXPECT_EQ(code_of([] { load("Age,Gender,IDH1,Grade\n45,1,1,0\n50,1,0,1\n"); }), psm::ErrorCode::EmptyGroup);
    EXPECT_EQ(code_of([] { load("Age,Gender,IDH1,Grade\n45,1,1,0\n"); }), psm::ErrorCode::EmptyCohort);
    EXPECT_EQ(code_of([] { load("Age,Gender,IDH1,Grade\n"); }), psm::ErrorCode::EmptyCohort);
}

TEST(Cohort, ExtraColumnsIgnoredAndOrderFree) {
    const auto c = load("Grade,Extra,IDH1,Gender,Age\n0,x,1,1,45.2\n1,y,0,0,61\n");
    EXPECT_EQ(c.value(0, 0), 45.2);
    EXPECT_EQ(c.value(1, 3), 1.0);
}

TEST(Cohort, QuotedFieldsAndBom) {
    const auto c = load("\xEF\xBB\xBF\"Age\",Gender,IDH1,Grade\n\"45.5\",1,1,0\n50,0,0,1\n");
    EXPECT_DOUBLE_EQ(c.value(0, 0), 45.5);
}

TEST(Cohort, SchemaValidation) {
    using psm::CovariateSpec;
    EXPECT_EQ(code_of([] { psm::Schema({{"A", Kind::binary, Role::covariate, {}, "", false}, {"Y", Kind::binary, Role::outcome, {}, "", false}}); }),
              psm::ErrorCode::InvalidSchema);
    EXPECT_EQ(code_of([] {
                  psm::Schema({{"T", Kind::continuous, Role::treatment, {}, "", false}, {"Y", Kind::binary, Role::outcome, {}, "", false}});
              }),
              psm::ErrorCode::InvalidSchema);
    EXPECT_EQ(code_of([] {
                  psm::Schema({{"T", Kind::binary, Role::treatment, {}, "", false},
                               {"T", Kind::binary, Role::covariate, {}, "", false},
                               {"Y", Kind::binary, Role::outcome, {}, "", false}});
              }),
              psm::ErrorCode::InvalidSchema);
}

TEST(Cohort, SchemaJsonRoundTrip) {
    const auto s = psm::glioma_schema();
    EXPECT_EQ(psm::Schema::from_json(nlohmann::json::parse(s.to_json().dump())), s);
}

TEST(Cohort, InvertedSourceColumn) {
    const auto schema = psm::Schema({
        {"Male", Kind::binary, Role::treatment, std::nullopt, "Female", true},
        {"X", Kind::continuous, Role::covariate, std::nullopt, "", false},
        {"Y", Kind::binary, Role::outcome, std::nullopt, "", false},
    });
    std::istringstream in("Female,X,Y\n1,0.5,0\n0,1.5,1\n0,2.5,1\n");
    const auto c = psm::load_cohort(in, schema);
    EXPECT_EQ(c.treatment(), (std::vector<double>{0, 1, 1}));
    std::ostringstream out;
    psm::write_csv(out, c);
    std::istringstream back(out.str());
    EXPECT_EQ(psm::load_cohort(back, schema), c);
}

TEST(Cohort, WithRolesSwapsTreatment) {
    const auto s = small_schema().with_roles("IDH1", "Grade");
    EXPECT_EQ(s[s.treatment_index()].name, "IDH1");
    EXPECT_EQ(s[s.index_of("Gender")].role, Role::covariate);
    EXPECT_EQ(code_of([] { small_schema().with_roles("Nope", "Grade"); }), psm::ErrorCode::UnknownColumn);
}

TEST(Cohort, CsvRoundTripIsExact) {
    const auto c = psm::glioma_marginals_fixture();
    std::ostringstream out;
    psm::write_csv(out, c);
    std::istringstream in(out.str());
    EXPECT_EQ(psm::load_cohort(in, c.schema()), c);
}

TEST(Cohort, DescribeCountsSumAcrossStrata) {
    const auto d = psm::describe(psm::glioma_marginals_fixture(), "Grade");
    EXPECT_EQ(d.stratum_sizes[0], d.stratum_sizes[1] + d.stratum_sizes[2]);
    for (const auto& e : d.entries) {
        if (e.kind == Kind::binary) {
            EXPECT_EQ(e.cells[0].count, e.cells[1].count + e.cells[2].count) << e.name;
        }
    }
}

TEST(Cohort, DescribeIsPermutationInvariant) {
    const auto c = psm::glioma_marginals_fixture();
    auto records = c.records();
    psm::RandomStream rng(5);
    rng.shuffle(records);
    const auto a = psm::describe(c, "Grade");
    const auto b = psm::describe(psm::Cohort(c.schema(), records), "Grade");
    for (std::size_t i = 0; i < a.entries.size(); ++i) {
        for (std::size_t s = 0; s < 3; ++s) {
            EXPECT_EQ(a.entries[i].cells[s].count, b.entries[i].cells[s].count);
            EXPECT_NEAR(a.entries[i].cells[s].mean, b.entries[i].cells[s].mean, 1e-9);
            EXPECT_NEAR(a.entries[i].cells[s].sd, b.entries[i].cells[s].sd, 1e-9);
        }
    }
}

TEST(Cohort, DescribeRejectsContinuousStratifier) {
    EXPECT_EQ(code_of([] { psm::describe(load(small_csv), "Age"); }), psm::ErrorCode::UnknownColumn);
    EXPECT_EQ(code_of([] { psm::describe(load(small_csv), "Nope"); }), psm::ErrorCode::UnknownColumn);
}

TEST(Cohort, ConstantCovariateIsAccepted) {
    const auto c = load("Age,Gender,IDH1,Grade\n40,1,0,0\n50,0,0,1\n60,1,0,1\n");
    const auto d = psm::describe(c, "Grade");
    EXPECT_EQ(d.entry("IDH1").cells[0].count, 0u);
}
