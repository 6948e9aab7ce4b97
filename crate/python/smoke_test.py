"""Smoke test for the gradekit Python module.

Build and install the module first:

    pip install --no-build-isolation ./crates/py
    python python/smoke_test.py
"""

import csv
import io
import json
import pathlib
import tempfile

import gradekit

ROSTER = "student_identifier\nBaronPoisson\nsergent-gamma\nstudent_T\n"
RUBRIC = (
    "name,total_points,prompt_code,prompt_message,feedback,points_to_remove\n"
    "Q1,10,1a,mean of wrong column,The mean was computed over the wrong column.,0.75\n"
    "Q2,5,2a,missing plot,A residual plot is missing.,2\n"
    "all_questions,,1,style,Please follow the style guide.,0.5\n"
)


def check_pure_functions():
    assert gradekit.rubric_template().startswith("name,total_points,")
    assert gradekit.rubric_template("positive").rstrip().endswith("points_to_add")

    rubric = gradekit.Rubric.parse(RUBRIC)
    assert rubric.questions() == ["Q1", "Q2"]
    assert len(rubric) == 3
    assert rubric.items()[0]["points"] == "0.75"
    assert gradekit.Rubric.parse(rubric.to_csv()).items() == rubric.items()
    assert rubric.cell_grade("Q1", ["1a", "1"]) == ("8.75", [])

    template = gradekit.PathTemplate("BaronPoisson", "hws/hw01-BaronPoisson.Rmd")
    assert template.instantiate("student_T") == "hws/hw01-student_T.Rmd"

    teams = gradekit.gradees(
        "student_identifier,team_identifier\na,red\nb,blue\nc,red\n", team=True
    )
    assert teams == [("red", ["a", "c"]), ("blue", ["b"])]

    assert gradekit.parse_input("1a, 1", ["1a", "1"]) == {
        "type": ["apply_codes"],
        "codes": ["1a", "1"],
    }
    try:
        gradekit.Rubric.parse(RUBRIC.replace("Q2,5,2a", "Q2,5,1"))
    except gradekit.GradekitError as e:
        assert "1" in str(e)
    else:
        raise AssertionError("duplicate code accepted")


def check_session():
    with tempfile.TemporaryDirectory() as d:
        root = pathlib.Path(d)
        (root / "roster.csv").write_text(ROSTER)
        (root / "rubric.csv").write_text(RUBRIC)
        (root / "hws").mkdir()
        for who in ["BaronPoisson", "sergent-gamma", "student_T"]:
            (root / "hws" / f"hw01-{who}.Rmd").write_text(f"# {who}\n")

        session = gradekit.Session(
            root / "rubric.csv",
            root / "roster.csv",
            "BaronPoisson",
            "hws/hw01-BaronPoisson.Rmd",
            "fb/hw01-BaronPoisson-feedback.md",
            root / "log.csv",
            root / "grades.csv",
            root=root,
        )
        assert session.current() == ("BaronPoisson", "Q1")
        assert json.loads(session.snapshot_json())["progress"]["total"] == 6
        session.apply(json.dumps({"type": "apply_codes", "codes": ["1a", "1"]}))
        while not session.finished:
            session.apply(json.dumps({"type": "apply_codes", "codes": []}))
        assert session.last_report()["complete"] == "3"

        rows = list(csv.DictReader(io.StringIO((root / "grades.csv").read_text())))
        baron = next(r for r in rows if r["student_identifier"] == "BaronPoisson")
        assert baron["grade_Q1"] == "8.75"
        assert baron["assignment_total"] == "13.75"
        feedback = (root / "fb" / "hw01-BaronPoisson-feedback.md").read_text()
        assert "Please follow the style guide." in feedback


if __name__ == "__main__":
    check_pure_functions()
    check_session()
    print("python smoke test: ok")
