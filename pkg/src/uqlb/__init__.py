"""Model-evaluation protocol, load balancer, scheduler backends and benchmark harness."""

__version__ = "0.1.0"
