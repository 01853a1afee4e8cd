package jobs

import (
	"errors"
	"fmt"
	"log"
)

func runJob(name string) {
	if err := retryLoop(name, 20); err != nil {
		log.Errorf("job failed: %v", err)
	}
}

func retryLoop(name string, n int) error {
	if err := attempt(name, n); err != nil {
		return fmt.Errorf("retry %d: %w", n, err)
	}
	return nil
}

func attempt(name string, n int) error {
	if n > 0 {
		return retryLoop(name, n-1)
	}
	return errors.New("gave up waiting for lease")
}

// pingPong forwards errors around a two-function loop without adding text.
func pingPong(n int) {
	if err := ping(n); err != nil {
		log.Errorf("ping pong stalled: %v", err)
	}
}

func ping(n int) error {
	return pong(n)
}

func pong(n int) error {
	if n > 0 {
		return ping(n - 1)
	}
	return nil
}
