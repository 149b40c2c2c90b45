"""Shared parser corpus: valid queries with expected structure, invalid
queries with expected 1-based error columns.

Error positions follow the parser's convention: the column where the
offending token starts, or one past the end of the text when the parser
ran out of input. ``err_at`` locates the offending token by substring
(with an occurrence index for repeats); ``err_at_end`` means end of text.
"""

from miniops.tsstore.sql import Query

VALID = [
    (
        'SELECT avg(value) FROM "cpu.load" WHERE server=\'s1\' AND ts >= 0 AND ts < 60000 GROUP BY time(10s)',
        Query("cpu.load", "avg", 0, 60000, (("server", "s1"),), 10, ()),
    ),
    (
        'SELECT last(value) FROM "disk.free" WHERE ts >= 100 AND ts < 200',
        Query("disk.free", "last", 100, 200),
    ),
    (
        'SELECT count(value) FROM "m" WHERE ts >= 0 AND ts < 1000 GROUP BY time(1s), client',
        Query("m", "count", 0, 1000, (), 1, ("client",)),
    ),
    (
        'SELECT avg(value) FROM "x" WHERE ts >= 0 AND ts < 60000 GROUP BY time(10s), client',
        Query("x", "avg", 0, 60000, (), 10, ("client",)),
    ),
    (
        'select min(value) from "m" where ts >= 5 and ts < 10',
        Query("m", "min", 5, 10),
    ),
    (
        'Select Max(value) From "m" Where ts >= 5 And ts < 10',
        Query("m", "max", 5, 10),
    ),
    (
        "SELECT sum(value) FROM \"net.bytes\" WHERE server='a' AND iface='eth0' AND ts >= 0 AND ts < 10",
        Query("net.bytes", "sum", 0, 10, (("server", "a"), ("iface", "eth0"))),
    ),
    (
        'SELECT avg(value) FROM "m" WHERE ts >= 0 AND ts < 7200000 GROUP BY time(2m)',
        Query("m", "avg", 0, 7200000, (), 120, ()),
    ),
    (
        'SELECT max(value) FROM "m" WHERE ts >= 0 AND ts < 7200000 GROUP BY time(1h)',
        Query("m", "max", 0, 7200000, (), 3600, ()),
    ),
    (
        'SELECT avg(value) FROM "m" WHERE ts < 10 AND ts >= 0',
        Query("m", "avg", 0, 10),
    ),
    (
        'SELECT avg(value) FROM "a.b-c_d" WHERE ts >= 0 AND ts < 5',
        Query("a.b-c_d", "avg", 0, 5),
    ),
    (
        "SELECT avg(value) FROM \"m\" WHERE client='Big Corp' AND ts >= 0 AND ts < 5",
        Query("m", "avg", 0, 5, (("client", "Big Corp"),)),
    ),
    (
        "SELECT avg(value) FROM \"m\" WHERE client='O\\'Brien' AND ts >= 0 AND ts < 5",
        Query("m", "avg", 0, 5, (("client", "O'Brien"),)),
    ),
    (
        'SELECT avg(value) FROM "we\\"ird" WHERE ts >= 0 AND ts < 5',
        Query('we"ird', "avg", 0, 5),
    ),
    (
        'SELECT avg(value) FROM "m" WHERE ts >= 0 AND ts < 90000 GROUP BY time(30s), client, role',
        Query("m", "avg", 0, 90000, (), 30, ("client", "role")),
    ),
    (
        "SELECT avg(value) FROM \"m\" WHERE server='s1' AND ts>=0 AND ts<9",
        Query("m", "avg", 0, 9, (("server", "s1"),)),
    ),
    (
        '  SELECT   avg ( value )   FROM   "m"   WHERE   ts   >=   0   AND   ts   <   9  ',
        Query("m", "avg", 0, 9),
    ),
    (
        'SELECT avg(value) FROM "m" WHERE ts >= 1700000000000 AND ts < 1700003600000',
        Query("m", "avg", 1700000000000, 1700003600000),
    ),
    (
        'SELECT last(value) FROM "m" WHERE ts >= 0 AND ts < 100000 GROUP BY time(100s), server',
        Query("m", "last", 0, 100000, (), 100, ("server",)),
    ),
    (
        "SELECT avg(value) FROM \"m\" WHERE role='dbms' AND ts >= 1 AND ts < 2",
        Query("m", "avg", 1, 2, (("role", "dbms"),)),
    ),
    (
        "SELECT avg(value) FROM \"m\" WHERE env.zone='a' AND ts >= 0 AND ts < 2",
        Query("m", "avg", 0, 2, (("env.zone", "a"),)),
    ),
    (
        'SELECT avg(VALUE) FROM "m" WHERE ts >= 0 AND ts < 2',
        Query("m", "avg", 0, 2),
    ),
    (
        'SELECT count(value) FROM "requests" WHERE ts >= 0 AND ts < 86400000',
        Query("requests", "count", 0, 86400000),
    ),
    (
        'SELECT min(value) FROM "m" WHERE ts >= 0 AND ts < 900000 GROUP BY time(90s)',
        Query("m", "min", 0, 900000, (), 90, ()),
    ),
    (
        "SELECT avg(value) FROM \"m\" WHERE x='1' AND ts >= 0 AND ts < 2000 GROUP BY time(1s), a, b, c",
        Query("m", "avg", 0, 2000, (("x", "1"),), 1, ("a", "b", "c")),
    ),
    (
        "SELECT avg(value) FROM \"m\" WHERE server='s1' AND server='s2' AND ts >= 0 AND ts < 1",
        Query("m", "avg", 0, 1, (("server", "s1"), ("server", "s2"))),
    ),
    (
        "SELECT last(value) FROM \"fleet.disk.free_gb\" WHERE client='acme' AND ts >= 0 AND ts < 9999999999999",
        Query("fleet.disk.free_gb", "last", 0, 9999999999999, (("client", "acme"),)),
    ),
    (
        'SELECT sum(value) FROM "m" WHERE ts >= 0 AND ts < 60000 GROUP BY time(60s)',
        Query("m", "sum", 0, 60000, (), 60, ()),
    ),
    (
        "SELECT avg(value) FROM \"m\" WHERE data_center='fr' AND ts >= 3 AND ts < 9",
        Query("m", "avg", 3, 9, (("data_center", "fr"),)),
    ),
    (
        'SELECT last(value) FROM "queue.lag" WHERE ts >= 0 AND ts < 10 GROUP BY time(10s), group_id',
        Query("queue.lag", "last", 0, 10, (), 10, ("group_id",)),
    ),
]

# (text, err_at | None, occurrence, err_at_end)
INVALID = [
    ("", None, 0, False),
    ("SELECT avg(value) WHERE server='s1' AND ts >= 0 AND ts < 1", "WHERE", 0, False),
    ("SELECT avg(value)", None, 0, True),
    ('SELECT median(value) FROM "m" WHERE ts >= 0 AND ts < 1', "median", 0, False),
    ('SELECT avg(speed) FROM "m" WHERE ts >= 0 AND ts < 1', "speed", 0, False),
    ('SELECT avg(value) FROM m WHERE ts >= 0 AND ts < 1', "m WHERE", 0, False),
    ('SELECT avg(value) FROM "m" ts >= 0 AND ts < 1', "ts", 0, False),
    ('SELECT avg(value) FROM "m" WHERE ts > 0 AND ts < 1', ">", 0, False),
    ('SELECT avg(value) FROM "m" WHERE ts >= 0', None, 0, True),
    ('SELECT avg(value) FROM "m" WHERE ts < 5', None, 0, True),
    ('SELECT avg(value) FROM "m" WHERE ts >= 0 AND ts >= 2 AND ts < 5', "ts >= 2", 0, False),
    ('SELECT avg(value) FROM "m" WHERE ts >= 10 AND ts < 5', None, 0, True),
    ('SELECT avg(value) FROM "m" WHERE ts >= 0 AND ts < 1 GROUP time(10s)', "time", 0, False),
    ('SELECT avg(value) FROM "m" WHERE ts >= 0 AND ts < 1 GROUP BY time(0s)', "0s)", 0, False),
    ('SELECT avg(value) FROM "m" WHERE ts >= 0 AND ts < 1 GROUP BY time(10x)', "x)", 0, False),
    ('SELECT avg(value) FROM "m" WHERE ts >= 0 AND ts < 1 GROUP BY client', "client", 0, False),
    ('SELECT avg value FROM "m" WHERE ts >= 0 AND ts < 1', "value", 0, False),
    ('SELECT avg(value) FROM "m" WHERE ts >= 0 AND ts < 1 AND', None, 0, True),
    ('SELECT avg(value) FROM "m" WHERE server=s1 AND ts >= 0 AND ts < 1', "s1 AND", 0, False),
    ('SELECT avg(value) FROM "m" WHERE ts >= 0 AND ts < 9 GROUP BY time(10)', ")", 1, False),
]


def expected_column(text: str, err_at, occurrence: int, err_at_end: bool) -> int:
    if err_at_end or err_at is None and text.strip() == "":
        return len(text) + 1 if err_at_end else 1
    pos = -1
    for _ in range(occurrence + 1):
        pos = text.index(err_at, pos + 1)
    return pos + 1
