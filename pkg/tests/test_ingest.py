import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from socmap import (
    Covariate,
    CovariateSchema,
    CoverageError,
    DataError,
    HorizonRecord,
    ModelSpec,
    SiteRecord,
    compute_stock,
    load_site_csv,
    log_transform,
    write_site_csv,
)
from socmap.errors import ConfigError
from socmap.ingest import load_horizon_csv


def hz(top, bottom, bd, soc, rf, site="s1"):
    return HorizonRecord(site_id=site, top_cm=top, bottom_cm=bottom,
                         bulk_density=bd, soc_pct=soc, rock_frag=rf)


SCHEMA = CovariateSchema((
    Covariate("clay", "numeric"),
    Covariate("land_use", "categorical", levels=("crop", "grass", "forest")),
))


class TestComputeStock:
    def test_single_horizon_identity(self):
        # 30 cm at BD 1.0 g/cm3 and 1% carbon: 0.3 m * 1000 kg/m3 * 0.01
        got = compute_stock([hz(0, 30, 1.0, 1.0, 0.0)], 30)
        assert got == pytest.approx(3.0, abs=1e-10)

    def test_two_horizons_partial_overlap_with_depth(self):
        horizons = [hz(0, 20, 1.2, 2.0, 0.1), hz(20, 40, 1.4, 1.0, 0.2)]
        # 0.2*1200*0.02*0.9 + 0.1*1400*0.01*0.8 = 4.32 + 1.12
        got = compute_stock(horizons, 30)
        assert got == pytest.approx(5.44, abs=1e-10)

    def test_zero_carbon_gives_zero_stock(self):
        horizons = [hz(0, 10, 1.1, 0.0, 0.3), hz(10, 35, 0.9, 0.0, 0.0)]
        assert compute_stock(horizons, 30) == 0.0

    def test_gap_raises_coverage_error(self):
        with pytest.raises(CoverageError):
            compute_stock([hz(0, 10, 1.0, 1.0, 0.0), hz(15, 30, 1.0, 1.0, 0.0)], 30)

    def test_overlap_raises_coverage_error(self):
        with pytest.raises(CoverageError):
            compute_stock([hz(0, 20, 1.0, 1.0, 0.0), hz(10, 30, 1.0, 1.0, 0.0)], 30)

    def test_hidden_overlap_below_depth_raises(self):
        with pytest.raises(CoverageError):
            compute_stock([hz(0, 30, 1.0, 1.0, 0.0), hz(20, 40, 1.0, 1.0, 0.0)], 30)

    def test_short_coverage_raises(self):
        with pytest.raises(CoverageError):
            compute_stock([hz(0, 25, 1.0, 1.0, 0.0)], 30)

    def test_negative_inputs_rejected_at_construction(self):
        with pytest.raises(DataError):
            hz(0, 30, -1.0, 1.0, 0.0)
        with pytest.raises(DataError):
            hz(0, 30, 1.0, -0.5, 0.0)
        with pytest.raises(DataError):
            hz(0, 30, 1.0, 1.0, 1.5)
        with pytest.raises(DataError):
            compute_stock([hz(0, 30, 1.0, 1.0, 0.0)], -5)

    @given(
        st.lists(
            st.tuples(
                st.floats(0.3, 2.2),      # bulk density
                st.floats(0.0, 12.0),     # soc percent
                st.floats(0.0, 0.9),      # rock fragments
                st.floats(2.0, 25.0),     # thickness
            ),
            min_size=1, max_size=6,
        ),
        st.integers(1, 4),
        st.floats(0.1, 0.9),
    )
    @settings(max_examples=100, deadline=None)
    def test_partition_refinement_invariance(self, layers, which, frac):
        horizons = []
        top = 0.0
        for bd, soc, rf, thick in layers:
            horizons.append(hz(top, top + thick, bd, soc, rf))
            top += thick
        depth = top
        base = compute_stock(horizons, depth)

        k = (which - 1) % len(horizons)
        h = horizons[k]
        cut = h.top_cm + frac * (h.bottom_cm - h.top_cm)
        refined = list(horizons)
        refined[k:k + 1] = [
            hz(h.top_cm, cut, h.bulk_density, h.soc_pct, h.rock_frag),
            hz(cut, h.bottom_cm, h.bulk_density, h.soc_pct, h.rock_frag),
        ]
        assert compute_stock(refined, depth) == pytest.approx(base, abs=1e-10)

    def test_monotone_in_soc_and_depth_nonincreasing_in_rf(self):
        base = [hz(0, 20, 1.2, 2.0, 0.1), hz(20, 40, 1.4, 1.0, 0.2)]
        s0 = compute_stock(base, 30)
        richer = [hz(0, 20, 1.2, 2.5, 0.1), hz(20, 40, 1.4, 1.0, 0.2)]
        assert compute_stock(richer, 30) >= s0
        assert compute_stock(base, 35) >= s0
        rockier = [hz(0, 20, 1.2, 2.0, 0.4), hz(20, 40, 1.4, 1.0, 0.2)]
        assert compute_stock(rockier, 30) <= s0


class TestLogTransform:
    def test_unit_target(self):
        recs = [SiteRecord("a", 0.0, 0.0, 1.0)]
        assert log_transform(recs)[0] == 0.0

    def test_e_target(self):
        recs = [SiteRecord("a", 0.0, 0.0, math.e)]
        assert log_transform(recs)[0] == pytest.approx(1.0, rel=1e-15)

    @pytest.mark.parametrize("y", [0.5, 3.0, 42.0])
    def test_round_trip(self, y):
        z = log_transform([SiteRecord("a", 0.0, 0.0, y)])[0]
        assert math.exp(z) == pytest.approx(y, rel=1e-12)

    def test_nonpositive_target_rejected(self):
        with pytest.raises(DataError):
            log_transform([SiteRecord("a", 0.0, 0.0, None)])


class TestSiteCsv:
    def test_parse_round_trip_with_missing(self, tmp_path):
        path = tmp_path / "sites.csv"
        path.write_text(
            "site_id,x_km,y_km,target,clay,land_use\n"
            "s1,0.0,0.0,2.5,31.5,crop\n"
            "s2,16.0,0.0,4.0,,grass\n"
            "s3,0.0,16.0,1.25,12.0,forest\n",
            encoding="utf-8")
        records = load_site_csv(path, SCHEMA)
        assert len(records) == 3
        assert records[1].covariates["clay"] is None
        assert records[0].covariates["land_use"] == "crop"
        assert records[2].target == 1.25

        out = tmp_path / "rt.csv"
        write_site_csv(records, SCHEMA, out)
        again = load_site_csv(out, SCHEMA)
        assert again == records
        out2 = tmp_path / "rt2.csv"
        write_site_csv(again, SCHEMA, out2)
        assert out.read_bytes() == out2.read_bytes()

    def test_negative_target_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("site_id,x_km,y_km,target,clay\ns1,0,0,-1,3\n",
                        encoding="utf-8")
        with pytest.raises(DataError, match="target"):
            load_site_csv(path, SCHEMA)

    def test_duplicate_site_id_rejected(self, tmp_path):
        path = tmp_path / "dup.csv"
        path.write_text(
            "site_id,x_km,y_km,target\ns1,0,0,1\ns1,1,0,2\n", encoding="utf-8")
        with pytest.raises(DataError, match="duplicated"):
            load_site_csv(path, SCHEMA)

    def test_unknown_column_rejected(self, tmp_path):
        path = tmp_path / "unk.csv"
        path.write_text("site_id,x_km,y_km,target,bogus\ns1,0,0,1,2\n",
                        encoding="utf-8")
        with pytest.raises(DataError, match="schema"):
            load_site_csv(path, SCHEMA)

    def test_missing_target_accepted_in_predict_mode(self, tmp_path):
        path = tmp_path / "pred.csv"
        path.write_text("site_id,x_km,y_km,target,clay\ns1,0,0,,3\n",
                        encoding="utf-8")
        with pytest.raises(DataError):
            load_site_csv(path, SCHEMA, require_target=True)
        records = load_site_csv(path, SCHEMA, require_target=False)
        assert records[0].target is None

    def test_unknown_categorical_level_rejected(self, tmp_path):
        path = tmp_path / "lvl.csv"
        path.write_text("site_id,x_km,y_km,target,land_use\ns1,0,0,1,swamp\n",
                        encoding="utf-8")
        with pytest.raises(DataError, match="level"):
            load_site_csv(path, SCHEMA)

    def test_parse_error_reports_row_number(self, tmp_path):
        path = tmp_path / "rownum.csv"
        path.write_text(
            "site_id,x_km,y_km,target,clay\ns1,0,0,1,3\ns2,0,1,oops,3\n",
            encoding="utf-8")
        with pytest.raises(DataError, match="row 3"):
            load_site_csv(path, SCHEMA)


class TestHorizonCsv:
    def test_groups_by_site(self, tmp_path):
        path = tmp_path / "hz.csv"
        path.write_text(
            "site_id,top_cm,bottom_cm,bulk_density,soc_pct,rock_frag\n"
            "s1,0,20,1.2,2.0,0.1\n"
            "s1,20,40,1.4,1.0,0.2\n"
            "s2,0,30,1.0,1.0,0.0\n",
            encoding="utf-8")
        groups = load_horizon_csv(path)
        assert set(groups) == {"s1", "s2"}
        assert compute_stock(groups["s1"], 30) == pytest.approx(5.44, abs=1e-10)
        assert compute_stock(groups["s2"], 30) == pytest.approx(3.0, abs=1e-10)


class TestModelSpec:
    def test_defaults_follow_recommended_values(self):
        spec = ModelSpec(name="LU", predictors=("clay", "land_use"))
        assert (spec.tree_size, spec.learning_rate, spec.min_obs_leaf,
                spec.bag_fraction) == (12, 0.01, 3, 0.7)

    def test_invalid_hyperparameters_rejected(self):
        with pytest.raises(ConfigError):
            ModelSpec(name="m", predictors=("clay",), learning_rate=0.0)
        with pytest.raises(ConfigError):
            ModelSpec(name="m", predictors=("clay",), bag_fraction=1.5)
        with pytest.raises(ConfigError):
            ModelSpec(name="m", predictors=())

    def test_predictors_checked_against_schema(self):
        spec = ModelSpec(name="m", predictors=("clay", "ph"))
        with pytest.raises(ConfigError, match="ph"):
            spec.validate_against(SCHEMA)
