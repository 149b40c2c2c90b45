"""miniops: a desk-scale, on-premise AIOps pipeline.

Fleet-configured collection agents deliver gzip-compressed record batches
to an ingester, which publishes them to a durable topic queue. A columnar
time-series store consumes the queue and answers mini-SQL queries. An alert
engine evaluates threshold and saturation-forecast rules against the store
and opens incident tickets. A gateway exposes the whole stack behind one
REST facade and an admin CLI, and a fleet simulator provides ground truth
for end-to-end reconciliation tests.
"""

__version__ = "0.1.0"
