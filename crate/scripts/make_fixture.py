#!/usr/bin/env python3
"""Writes the 100-table fixture corpus used by tests and the golden run.

Deterministic: rerunning produces the same bytes. Sampled values are the
first rows of each synthetic table (head-of-file convention).
"""
import json
import random
import sys

COUNTRIES = ["Finland", "Denmark", "Norway", "Iceland", "Netherlands", "Canada", "Brazil", "India", "Kenya", "Japan"]
CITIES = ["Seattle", "Austin", "Boston", "Denver", "Chicago", "Portland", "Atlanta", "Miami", "Phoenix", "Detroit"]
STATES = ["WA", "TX", "MA", "CO", "IL", "OR", "GA", "FL", "AZ", "MI"]
GENRES = ["Drama", "Comedy", "Action", "Horror", "Documentary", "Thriller"]
MOVIES = ["The Long Night", "Blue River", "Paper Moon", "Iron Coast", "Quiet Storm", "Silver Lining",
          "Last Orbit", "Golden Hour", "Red Harbor", "Hidden Valley"]


def gen(kind, rng, i):
    if kind == "country":
        return COUNTRIES[i % len(COUNTRIES)]
    if kind == "city":
        return CITIES[i % len(CITIES)]
    if kind == "state":
        return STATES[i % len(STATES)]
    if kind == "year":
        return 2010 + (i % 10)
    if kind == "date":
        return "2020-%02d-%02d" % (1 + i % 12, 1 + (3 * i) % 28)
    if kind == "month":
        return ["Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct"][i % 10]
    if kind == "hour":
        return "%02d:00" % (i * 2 % 24)
    if kind == "int":
        return rng.randint(0, 5000)
    if kind == "small":
        return rng.randint(0, 10)
    if kind == "float":
        return round(rng.uniform(0, 100), 2)
    if kind == "score":
        return round(rng.uniform(2.5, 8.0), 3)
    if kind == "bool":
        return rng.choice([True, False])
    if kind == "genre":
        return GENRES[i % len(GENRES)]
    if kind == "movie":
        return MOVIES[i % len(MOVIES)]
    if kind == "id":
        return "R%04d" % (1000 + i)
    if kind == "zip":
        return "%05d" % (98000 + 7 * i)
    if kind == "lat":
        return round(47.0 + rng.uniform(-1, 1), 4)
    if kind == "lon":
        return round(-122.0 + rng.uniform(-1, 1), 4)
    if kind.startswith("cat:"):
        opts = kind[4:].split("|")
        return opts[i % len(opts)]
    raise ValueError(kind)


# (title, tags, description, [(column, kind)])
THEMES = [
    ("World Happiness {y}", ["social science", "happiness"],
     "Happiness scores and rankings of countries from the Gallup World Poll. Source: https://worldhappiness.report",
     [("country", "country"), ("year", "year"), ("happiness_score", "score"), ("gdp_per_capita", "float"),
      ("social_support", "float"), ("life_expectancy", "float"), ("freedom", "float")]),
    ("Remote Work and Mental Health {y}", ["covid", "employment", "mental health"],
     "Survey of employees working remotely during the COVID-19 pandemic, covering stress levels and work-life balance.",
     [("respondent_id", "id"), ("remote_days", "small"), ("stress_level", "cat:Low|Medium|High"),
      ("hours_worked", "int"), ("country", "country"), ("year", "year")]),
    ("COVID-19 Employee Stress Survey {y}", ["covid", "health", "employment"],
     "Responses on workplace stress, vacation days taken and employment status during the pandemic. Source: national labour survey",
     [("employee_id", "id"), ("stress_score", "float"), ("vacation_days", "small"), ("employment_status", "cat:Employed|Furloughed|Unemployed"),
      ("remote", "bool"), ("date", "date")]),
    ("Work From Home Productivity {y}", ["covid", "productivity"],
     "Daily productivity logs of employees working from home during lockdowns.",
     [("employee_id", "id"), ("date", "date"), ("hours_logged", "float"), ("tasks_completed", "int"), ("remote", "bool")]),
    ("IMDB Movies Dataset {y}", ["movies", "entertainment"],
     "Top rated movies with genre, release year and ratings scraped from IMDB. Source: https://www.imdb.com",
     [("title", "movie"), ("genre", "genre"), ("year", "year"), ("rating", "score"), ("votes", "int")]),
    ("Netflix Movie Catalog {y}", ["movies", "streaming"],
     "Movies available on Netflix with their genre and duration.",
     [("movie_name", "movie"), ("genre", "genre"), ("duration_minutes", "int"), ("release_year", "year")]),
    ("Box Office Revenue {y}", ["movies", "finance"],
     "Domestic box office revenue by movie and opening weekend.",
     [("movie_name", "movie"), ("opening_weekend", "int"), ("gross", "int"), ("date", "date")]),
    ("US Housing Prices {y}", ["real estate", "economics"],
     "Home sale prices with property characteristics across US cities. Source: county assessor records",
     [("price", "int"), ("bedrooms", "small"), ("bathrooms", "small"), ("sqft", "int"), ("zipcode", "zip"), ("city", "city")]),
    ("City Air Quality {y}", ["environment", "health"],
     "Hourly air pollution measurements from monitoring stations.",
     [("station", "id"), ("hour", "hour"), ("pm25", "float"), ("ozone", "float"), ("city", "city")]),
    ("Global GDP by Country {y}", ["economics"],
     "Gross domestic product by country and year. Source: World Bank",
     [("country", "country"), ("year", "year"), ("gdp", "int")]),
    ("Monthly Retail Sales {y}", ["business", "retail"],
     "Retail sales totals by store and month.",
     [("store", "id"), ("month", "month"), ("units_sold", "int"), ("revenue", "float"), ("state", "state")]),
    ("Student Exam Scores {y}", ["education"],
     "Exam scores of students with demographic attributes.",
     [("student_id", "id"), ("gender", "cat:F|M"), ("math_score", "int"), ("reading_score", "int"), ("writing_score", "int")]),
    ("Heart Disease Diagnosis {y}", ["health", "medicine"],
     "Patient records with clinical measurements and heart disease diagnosis labels. Source: UCI Machine Learning Repository",
     [("age", "int"), ("cholesterol", "int"), ("resting_bp", "int"), ("max_heart_rate", "int"), ("diagnosis", "cat:0|1")]),
    ("Traffic Collisions {y}", ["transportation", "safety"],
     "Reported traffic collisions with location and severity.",
     [("collision_id", "id"), ("date", "date"), ("severity", "cat:Minor|Serious|Fatal"), ("latitude", "lat"), ("longitude", "lon")]),
    ("Global Temperature Anomalies {y}", ["climate", "environment"],
     "Annual land temperature anomalies by country. Source: Berkeley Earth",
     [("country", "country"), ("year", "year"), ("avg_temperature", "float"), ("anomaly", "float")]),
    ("Employee Attrition {y}", ["hr", "employment"],
     "HR records of employees with attrition labels.",
     [("employee_id", "id"), ("department", "cat:Sales|R&D|HR"), ("monthly_income", "int"), ("years_at_company", "small"), ("attrition", "cat:Yes|No")]),
    ("Tweet Sentiment {y}", ["social media", "nlp"],
     "Tweets annotated with sentiment labels.",
     [("tweet_id", "id"), ("text", "cat:love it|terrible service|just ok|great news"), ("sentiment", "cat:positive|negative|neutral"), ("date", "date")]),
    ("Bike Share Trips {y}", ["transportation"],
     "Bike share rentals per station and hour, with weather.",
     [("station", "id"), ("hour", "hour"), ("rentals", "int"), ("temperature", "float"), ("city", "city")]),
    ("Wine Quality Ratings {y}", ["food", "chemistry"],
     "Physicochemical properties and quality ratings of wines.",
     [("fixed_acidity", "float"), ("alcohol", "float"), ("ph", "float"), ("quality", "small")]),
    ("Unemployment Rate by State {y}", ["economics", "employment"],
     "Monthly unemployment rates by US state. Source: Bureau of Labor Statistics",
     [("state", "state"), ("month", "month"), ("year", "year"), ("unemployment_rate", "float")]),
]

YEARS = [2019, 2020, 2021, 2022, 2023]


def main(out):
    rng = random.Random(20240501)
    lines = []
    n = 0
    for round_ in range(5):
        for t, (title, tags, desc, cols) in enumerate(THEMES):
            y = YEARS[round_]
            columns = []
            for ci, (name, kind) in enumerate(cols):
                values = [gen(kind, rng, r + 3 * round_ + ci) for r in range(10)]
                columns.append({"name": name, "sampled_values": values})
            num_rows = rng.randint(100, 200000)
            rec = {
                "id": "ds-%03d" % n,
                "title": title.format(y=y),
                "filename": title.format(y=y).lower().replace(" ", "_").replace("-", "_") + ".csv",
                "description": desc,
                "tags": tags,
                "size_bytes": num_rows * rng.randint(30, 120),
                "num_rows": num_rows,
                "num_cols": len(columns),
                "usability_score": round(rng.uniform(0.4, 1.0), 2),
                "downloads": rng.randint(0, 90000),
                "columns": columns,
            }
            lines.append(json.dumps(rec, separators=(",", ":")))
            n += 1
    with open(out, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "crates/core/tests/fixtures/corpus.jsonl")
