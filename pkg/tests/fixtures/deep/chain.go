package deep

import (
	"errors"
	"fmt"
	"log"
)

func serve() {
	if err := stageAlpha(); err != nil {
		log.Errorf("request aborted: %v", err)
	}
}

func stageAlpha() error {
	if err := stageBravo(); err != nil {
		return fmt.Errorf("alpha layer rejected work: %w", err)
	}
	return nil
}

func stageBravo() error {
	if err := stageCharlie(); err != nil {
		return fmt.Errorf("bravo layer rejected work: %w", err)
	}
	return nil
}

func stageCharlie() error {
	if err := stageDelta(); err != nil {
		return fmt.Errorf("charlie layer rejected work: %w", err)
	}
	return nil
}

func stageDelta() error {
	if err := stageEcho(); err != nil {
		return fmt.Errorf("delta layer rejected work: %w", err)
	}
	return nil
}

func stageEcho() error {
	if err := stageFoxtrot(); err != nil {
		return fmt.Errorf("echo layer rejected work: %w", err)
	}
	return nil
}

func stageFoxtrot() error {
	if err := stageGolf(); err != nil {
		return fmt.Errorf("foxtrot layer rejected work: %w", err)
	}
	return nil
}

func stageGolf() error {
	if err := stageHotel(); err != nil {
		return fmt.Errorf("golf layer rejected work: %w", err)
	}
	return nil
}

func stageHotel() error {
	if err := stageIndia(); err != nil {
		return fmt.Errorf("hotel layer rejected work: %w", err)
	}
	return nil
}

func stageIndia() error {
	if err := stageJuliet(); err != nil {
		return fmt.Errorf("india layer rejected work: %w", err)
	}
	return nil
}

func stageJuliet() error {
	if err := stageKilo(); err != nil {
		return fmt.Errorf("juliet layer rejected work: %w", err)
	}
	return nil
}

func stageKilo() error {
	if err := stageLima(); err != nil {
		return fmt.Errorf("kilo layer rejected work: %w", err)
	}
	return nil
}

func stageLima() error {
	if err := stageMike(); err != nil {
		return fmt.Errorf("lima layer rejected work: %w", err)
	}
	return nil
}

func stageMike() error {
	if err := stageNovember(); err != nil {
		return fmt.Errorf("mike layer rejected work: %w", err)
	}
	return nil
}

func stageNovember() error {
	if err := stageOscar(); err != nil {
		return fmt.Errorf("november layer rejected work: %w", err)
	}
	return nil
}

func stageOscar() error {
	return errors.New("oscar layer ran out of workers")
}
