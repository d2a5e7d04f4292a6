"""Process-boundary API stub: the teacher lives in a child process, only logits cross the pipe."""

import multiprocessing as mp
import threading
from pathlib import Path
from typing import Optional

import numpy as np
import torch

from src.blackbox.ledger import CL_PHASE
from src.blackbox.api import QueryApi
from src.nets import load_classifier
from src.utils.logger import setup_logger


logger = setup_logger(__name__)

RESPONSE_TIMEOUT = 120.0  # seconds without a reply before the stub is declared dead


def _serve(checkpoint_path: str, num_threads: int, conn) -> None:
    """Child-process loop: load the teacher, answer query messages until told to close."""
    torch.set_num_threads(num_threads)
    teacher = load_classifier(Path(checkpoint_path)).eval()
    conn.send(("ready", teacher.head_sizes[0], list(teacher.image_shape)))
    while True:
        message = conn.recv()
        if message[0] == "close":
            break
        if message[0] == "query":
            with torch.no_grad():
                logits = teacher(torch.from_numpy(message[1]), 1)
            conn.send(("logits", logits.numpy()))
    conn.close()


class RemoteBlackBoxApi(QueryApi):
    """Same contract as BlackBoxApi; no parameter access path exists in this process."""

    def __init__(self, checkpoint_path: Path, task_id: int, budget: Optional[int] = None):
        ctx = mp.get_context("spawn")
        self._conn, child_conn = ctx.Pipe()
        self._process = ctx.Process(
            target=_serve,
            args=(str(checkpoint_path), torch.get_num_threads(), child_conn),
            daemon=True,
        )
        self._process.start()
        self._lock = threading.Lock()

        status, num_classes, image_shape = self._receive()
        if status != "ready":
            raise RuntimeError(f"API stub for task {task_id} failed to start")
        super().__init__(task_id, num_classes, tuple(image_shape), budget)
        logger.info(f"Started API stub for task {task_id} (pid {self._process.pid})")

    def _receive(self):
        if not self._conn.poll(RESPONSE_TIMEOUT):
            self._process.kill()
            raise RuntimeError(f"API stub not responding ({RESPONSE_TIMEOUT:.0f}s without reply)")
        return self._conn.recv()

    def query(self, x_batch: torch.Tensor, phase: str = CL_PHASE) -> torch.Tensor:
        self._check_batch(x_batch)
        self.ledger.charge(len(x_batch), phase)
        payload = np.ascontiguousarray(x_batch.detach().cpu().numpy())
        with self._lock:
            self._conn.send(("query", payload))
            _, logits = self._receive()
        return torch.from_numpy(logits).to(x_batch.device)

    def close(self) -> None:
        if self._process.is_alive():
            try:
                self._conn.send(("close",))
            except (BrokenPipeError, OSError):
                pass
            self._process.join(timeout=10)
            if self._process.is_alive():
                self._process.kill()
        self._conn.close()

    def __enter__(self) -> "RemoteBlackBoxApi":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
