"""Shared fixtures: toy SQLite databases under a BIRD-style root."""

import sqlite3

import pytest


def _build_shop(path: str) -> None:
    conn = sqlite3.connect(path)
    conn.executescript(
        """
        CREATE TABLE cust (id INTEGER PRIMARY KEY, name TEXT, ct TEXT);
        CREATE TABLE orders (
            id INTEGER PRIMARY KEY, cust_id INTEGER, total REAL, placed TEXT
        );
        INSERT INTO cust VALUES
            (1, 'Ada', 'AU'), (2, 'Bo', 'NZ'), (3, 'Cy', 'AU'), (4, 'Di', 'US');
        INSERT INTO orders VALUES
            (1, 1, 50.0, '2024-01-05'),
            (2, 1, 70.0, '2024-01-20'),
            (3, 2, 20.0, '2024-02-01'),
            (4, 3, 90.0, '2024-02-11'),
            (5, 4, 10.0, '2024-03-01');
        """
    )
    conn.commit()
    conn.close()


def _build_school(path: str) -> None:
    conn = sqlite3.connect(path)
    conn.executescript(
        """
        CREATE TABLE students (
            id INTEGER PRIMARY KEY, name TEXT, grade INTEGER, age INTEGER
        );
        CREATE TABLE enrollments (sid INTEGER, course TEXT, score INTEGER);
        INSERT INTO students VALUES
            (1, 'Eve', 5, 10), (2, 'Fay', 6, 11), (3, 'Gus', 5, 10), (4, 'Hal', 7, 12);
        INSERT INTO enrollments VALUES
            (1, 'math', 88), (1, 'art', 75), (2, 'math', 92),
            (3, 'art', 64), (4, 'math', 70);
        """
    )
    conn.commit()
    conn.close()


@pytest.fixture(scope="session")
def db_root(tmp_path_factory) -> str:
    root = tmp_path_factory.mktemp("dbs")
    shop_dir = root / "shop"
    shop_dir.mkdir()
    _build_shop(str(shop_dir / "shop.sqlite"))
    school_dir = root / "school"
    school_dir.mkdir()
    _build_school(str(school_dir / "school.sqlite"))
    return str(root)


@pytest.fixture(scope="session")
def shop_db(db_root) -> str:
    return f"{db_root}/shop/shop.sqlite"


@pytest.fixture(scope="session")
def school_db(db_root) -> str:
    return f"{db_root}/school/school.sqlite"
